#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symode/discover.hpp"
#include "symode/dynamics.hpp"
#include "symode/funclib.hpp"
#include "symode/model.hpp"
#include "symode/term.hpp"

namespace symode {

/// Discovered terms of one equation. A non-canonical set (an expression outside the
/// library span) matches nothing, not even another non-canonical set.
struct TermSet {
    std::map<TermKey, double> terms;
    bool canonical = true;
};
using TermSets = std::vector<TermSet>;

/// Nonzero entries per row; entries with |c| < threshold are dropped.
TermSets term_set(const SindyModel& model, double threshold = 0.0);
/// Canonical expansion of each expression against lib.
TermSets term_set(const std::vector<Expr>& equations, const FunctionLibrary& lib, double threshold = 0.0);
/// The system's own equations.
TermSets truth_term_sets(const OdeSystem& system);

struct SuccessFlags {
    std::vector<bool> per_eq;
    bool joint = false;
};

/// Exact support equality per equation; throws std::invalid_argument on a dimension mismatch.
SuccessFlags success(const TermSets& discovered, const TermSets& truth);

/// sum over the true terms of (theta - theta_hat)^2, per equation; absent terms count as 0.
std::vector<double> squared_parameter_error(const TermSets& discovered, const TermSets& truth);

struct RunRecord {
    int run = 0;
    std::uint64_t seed = 0;
    std::string method;
    bool failed = false;
    std::string error;
    std::vector<std::string> equations;
    TermSets discovered;
    std::vector<bool> eq_success;
    bool joint = false;
    std::vector<double> sq_error;  // per equation
    Eigen::MatrixXd ltp;           // test ICs x checkpoints, NaN where divergent
    double lambda = 0.0;
    std::vector<std::string> diagnostics;
    double wall_seconds = 0.0;  // kept in memory only
};

enum class RmseMode { Successful, All };

/// sqrt(sum_k |theta - theta_hat_k|^2 / K) over the runs kept by mode. scope is an
/// equation index, or -1 for all equations stacked. nullopt: no successful run (N/A).
std::optional<double> rmse_params(const std::vector<RunRecord>& records, RmseMode mode, int scope);

struct LtpCurve {
    std::vector<double> times;
    std::vector<double> mean;  // NaN where every trajectory diverged
    std::vector<double> std;
    std::vector<int> divergent;
    std::vector<int> count;  // finite contributions
};

inline constexpr double kDivergenceNorm = 1e6;

/// Per initial condition (rows of ics) and checkpoint: mean squared state error between the
/// model and the true system, both integrated by RK4 with the system's internal step.
/// A model state with norm > 1e6 (or non-finite) marks that row divergent from then on (NaN).
Eigen::MatrixXd long_term_errors(const DynamicsOracle& model, const OdeSystem& system, const Eigen::MatrixXd& ics,
                                 const std::vector<double>& checkpoints);
LtpCurve summarize_ltp(const std::vector<Eigen::MatrixXd>& errors, const std::vector<double>& checkpoints);
LtpCurve long_term_error(const DynamicsOracle& model, const OdeSystem& system, const Eigen::MatrixXd& ics,
                         const std::vector<double>& checkpoints);

struct BenchConfig {
    std::string system = "oscillator";
    std::vector<std::string> methods{"sindy", "equiv-c"};
    std::optional<NoiseSpec> noise;  // nullopt: the system default
    int runs = 20;
    std::uint64_t master_seed = 0;
    std::optional<SplitSizes> splits;
    std::optional<int> steps;
    bool smooth = true;
    DiscoveryConfig discovery;
    std::optional<double> threshold;  // nullopt: the system default
    /// Replaces the system's known generators when set.
    std::optional<std::vector<Generator>> generators;
    double horizon = 0.0;  // 0: steps * dt of the system
    int checkpoints = 10;
    int jobs = 1;
    std::string config_hash;
};

const std::vector<std::string>& method_names();

struct MethodSummary {
    std::string method;
    int runs = 0;
    int failed = 0;
    std::vector<double> success_eq;
    double success_joint = 0.0;
    std::vector<std::optional<double>> rmse_successful_eq;
    std::optional<double> rmse_successful_joint;
    std::vector<double> rmse_all_eq;
    double rmse_all_joint = 0.0;
    LtpCurve ltp;
    int divergent = 0;  // initial conditions that diverged within the horizon, summed over runs
};

struct BenchmarkReport {
    BenchConfig config;
    int dim = 0;
    std::vector<double> checkpoints;
    std::vector<RunRecord> records;  // run-major, methods in config order
    std::vector<MethodSummary> summaries;
};

/// One discovery run on prepared data: fits the method and fills discovery fields of a record.
RunRecord run_method(const std::string& method, const OdeSystem& system, const TrainingData& data,
                     const std::vector<Generator>& gens, const DiscoveryConfig& cfg);

BenchmarkReport run_benchmark(const BenchConfig& cfg);

std::vector<MethodSummary> summarize(const std::vector<RunRecord>& records, const std::vector<std::string>& methods,
                                     int dim, const std::vector<double>& checkpoints);

/// report.json, tables.csv and ltp.csv. Wall times are not written so reruns are byte-identical.
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir);
/// Reads report.json and recomputes every aggregate from the run records; throws
/// std::runtime_error when a stored aggregate differs.
BenchmarkReport load_report(const std::filesystem::path& dir);

}  // namespace symode
