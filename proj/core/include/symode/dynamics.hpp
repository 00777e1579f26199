#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symode/expr.hpp"
#include "symode/symmetry.hpp"
#include "symode/term.hpp"

namespace symode {

inline constexpr double kInternalStep = 0.002;

enum class NoiseKind { None, AdditiveRelative, Multiplicative };

std::string to_string(NoiseKind kind);
std::optional<NoiseKind> parse_noise_kind(std::string_view name);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double sigma = 0.0;  // sigma_R for additive, sigma of eps for multiplicative
    std::uint64_t seed = 0;
};

enum class SamplerKind { Annulus, Box, LotkaVolterra };

struct SamplerSpec {
    SamplerKind kind = SamplerKind::Box;
    double lo = 0.0;  // box bounds per coordinate, or radius bounds for the annulus
    double hi = 1.0;
    double energy_lo = 3.0;  // Lotka-Volterra Hamiltonian band
    double energy_hi = 4.5;
    long max_draws = 100000;
};

struct SplitSizes {
    int train = 0;
    int val = 0;
    int test = 0;
};

struct OdeSystem {
    std::string name;
    int dim = 0;
    std::vector<std::string> rhs_text;
    std::vector<Expr> rhs;
    /// Hand-written expansion of each equation: (term, coefficient).
    std::vector<std::vector<std::pair<TermKey, double>>> truth_terms;
    std::vector<Generator> known_generators;
    SamplerSpec sampler;

    SplitSizes splits;
    int steps = 100;        // samples per trajectory, T
    double dt = 0.2;        // sampling interval
    NoiseSpec noise;        // default noise (seed unused)
    int library_degree = 2;
    bool library_exponentials = false;
    double threshold = 0.05;

    ExprDynamics dynamics() const { return ExprDynamics(rhs); }
    /// Truth coefficients as a d x p matrix over the given library term order.
    Eigen::MatrixXd truth_matrix(const std::vector<TermKey>& terms) const;
};

const std::vector<std::string>& system_names();
/// Throws std::invalid_argument for unknown names.
OdeSystem get_system(std::string_view name);

/// Lotka-Volterra energy used by the initial-condition filter.
double lotka_volterra_energy(const Eigen::VectorXd& x);

struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    Eigen::MatrixXd states;        // T x d, observed
    Eigen::MatrixXd clean_states;  // T x d, before noise
    Eigen::MatrixXd smoothed;      // empty or T x d
    Eigen::MatrixXd derivs;        // empty or T x d
    std::uint64_t seed = 0;

    Eigen::Index length() const noexcept { return states.rows(); }
    /// smoothed if present, else raw states
    const Eigen::MatrixXd& signal() const noexcept { return smoothed.size() > 0 ? smoothed : states; }
};

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Classical RK4 with n_internal steps of dt_internal; records x0 and every stride-th state.
/// Throws DivergenceError with the internal step index on a non-finite state.
Trajectory rk4_integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double dt_internal, long n_internal,
                         int stride);

Eigen::VectorXd sample_initial(const OdeSystem& system, std::mt19937_64& rng);

/// Returns a copy with states replaced by noisy observations; clean_states is preserved.
Trajectory add_noise(const Trajectory& traj, const NoiseSpec& spec);

struct GpSmoothConfig {
    std::vector<double> length_scales{5, 10, 20, 50, 100};  // multiples of dt
    std::vector<double> noise_ratios{0.001, 0.01, 0.03, 0.1, 0.3, 1.0};  // sigma_n / std(x)
    int max_fit_points = 500;
    int max_condition_points = 2000;
};

struct GpHyper {
    double length = 0.0;
    double signal_sd = 0.0;
    double noise_sd = 0.0;
    double log_marginal = 0.0;
};

/// Per-dimension squared-exponential GP posterior mean on the full time grid.
Trajectory gp_smooth(const Trajectory& traj, const GpSmoothConfig& cfg = {}, std::vector<GpHyper>* chosen = nullptr);

/// Second-order finite differences of signal(); forward difference (with warning) when T = 2.
Trajectory estimate_derivatives(const Trajectory& traj, std::string* warning = nullptr);

struct Dataset {
    std::string system;
    int dim = 0;
    double dt = 0.0;
    NoiseSpec noise;
    std::uint64_t master_seed = 0;
    std::string config_hash;
    bool smoothed = false;
    std::vector<Trajectory> train, val, test;

    /// Rows of signal() and derivs stacked over a split.
    Eigen::MatrixXd stacked_states(const std::vector<Trajectory>& split) const;
    Eigen::MatrixXd stacked_derivs(const std::vector<Trajectory>& split) const;
};

struct GenerateOptions {
    std::optional<NoiseSpec> noise;  // nullopt: the system default (the seed field is ignored)
    std::uint64_t seed = 0;
    std::optional<SplitSizes> splits;
    std::optional<int> steps;
    bool smooth = true;
    GpSmoothConfig gp;
    std::string config_hash;
    int jobs = 1;
};

/// Trajectory k (train, then val, then test) draws its initial condition from
/// split_seed(seed, 2k) and its noise from split_seed(seed, 2k+1).
Dataset generate_dataset(const OdeSystem& system, const GenerateOptions& opts);

void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace symode
