#pragma once

// Command-line configuration: a JSON document validated against a fixed schema.
// Flags are merged into the document before validation so both paths share one check.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "symode/discover.hpp"
#include "symode/dynamics.hpp"
#include "symode/symmetry.hpp"

namespace symode::cli {

/// A config problem. path is a JSON pointer to the offending key, e.g. "/discovery/gp/population".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path))
    {
    }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct GeneratorSpec {
    std::string label;
    std::optional<Eigen::MatrixXd> matrix;  // linear field L x
    std::vector<std::string> field;         // closed-form components otherwise
    std::string path;                       // for errors found once the dimension is known
};

struct Config {
    std::optional<std::string> system;                 // registered system
    std::optional<std::vector<std::string>> equations;  // ad hoc dynamics
    std::optional<std::string> dataset;

    std::optional<int> degree;
    std::optional<bool> exponentials;
    std::optional<std::vector<GeneratorSpec>> generators;  // nullopt: the system's known generators

    std::optional<std::string> method;
    DiscoveryConfig discovery;
    std::optional<double> threshold;  // nullopt: the system default

    std::optional<double> noise_sigma;
    std::optional<std::string> noise_kind;  // nullopt: the system's kind
    std::optional<SplitSizes> splits;
    std::optional<int> steps;
    bool smooth = true;

    std::vector<std::string> methods{"sindy", "equiv-c"};
    int runs = 20;
    double horizon = 0.0;
    int checkpoints = 10;

    int samples = 200;
    double tol = 1e-8;
    std::optional<Eigen::MatrixXd> points;

    std::uint64_t seed = 0;
    std::optional<std::string> output;

    std::string hash;  // of the validated document without the output entry
};

/// Parses a config file; syntax errors are ConfigErrors.
nlohmann::json read_config_file(const std::filesystem::path& file);

/// Validates and types the document. Unknown keys and type mismatches throw ConfigError.
Config parse_config(const nlohmann::json& doc);

/// FNV-1a 64 over the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Builds generators once the state dimension is known; mismatches throw ConfigError.
std::vector<Generator> build_generators(const std::vector<GeneratorSpec>& specs, int dim);

/// Noise for a system: the config sigma with the config kind, else the system default.
std::optional<NoiseSpec> resolve_noise(const Config& cfg, const OdeSystem& system);

}  // namespace symode::cli
