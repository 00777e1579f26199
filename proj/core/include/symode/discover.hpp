#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symode/constraint.hpp"
#include "symode/dynamics.hpp"
#include "symode/expr.hpp"
#include "symode/funclib.hpp"
#include "symode/model.hpp"
#include "symode/symmetry.hpp"

namespace symode {

/// Stacked regression inputs. Validation rows may be empty.
struct TrainingData {
    Eigen::MatrixXd X;   // N x d states (smoothed when available)
    Eigen::MatrixXd dX;  // N x d derivative estimates
    Eigen::MatrixXd X_val;
    Eigen::MatrixXd dX_val;
    double dt = 0.0;  // sampling interval, the default flow horizon
};

TrainingData training_data(const Dataset& data);

struct OptimizerConfig {
    int max_iters = 500;
    double grad_tol = 1e-8;
    int memory = 10;
};

struct GpConfig {
    int population = 256;
    int generations = 100;
    double crossover = 0.7;
    double subtree_mutation = 0.2;
    double point_mutation = 0.1;
    int max_depth = 8;
    int init_depth = 4;
    double parsimony = 1e-3;  // alpha per node
    int tournament = 7;
    double const_lo = -2.0;
    double const_hi = 2.0;
    bool use_exp = true;
    bool use_div = true;
    int max_points = 1000;  // fitness rows, evenly spaced
};

struct DiscoveryConfig {
    double threshold = 0.05;
    int max_rounds = 10;

    // Equiv-r. No lambda: pick from lambda_grid on validation equation loss.
    std::optional<double> lambda_symm;
    std::vector<double> lambda_grid{0.01, 0.1, 1.0};
    LossKind loss_kind = LossKind::IGFE;
    double tau = 0.0;  // 0: the data sampling interval
    double eps = kDefaultGroupEpsilon;
    int substeps = 8;
    int batch_size = 512;
    OptimizerConfig optimizer;

    GpConfig gp;

    std::uint64_t seed = 0;
    std::string config_hash;
};

struct StlsqResult {
    Eigen::MatrixXd W;  // d x p
    int rounds = 0;
    std::vector<std::string> warnings;
    /// Support (nonzero count per equation) after every round, for auditing monotonicity.
    std::vector<std::vector<int>> support_history;
};

/// Sequential thresholded least squares on Theta_X (N x p), dX (N x d).
StlsqResult stlsq(const Eigen::MatrixXd& Theta_X, const Eigen::MatrixXd& dX, double threshold, int max_rounds = 10);

struct FitResult {
    explicit FitResult(SindyModel m) : model(std::move(m)) {}

    SindyModel model;
    int rounds = 0;
    bool converged = true;
    double lambda = 0.0;  // Equiv-r only
    int rank = -1;        // Equiv-c: final nullspace dimension
    std::vector<std::string> diagnostics;
};

FitResult sindy_fit(const TrainingData& data, const FunctionLibrary& lib, const DiscoveryConfig& cfg);

/// Least squares in beta-space with thresholding by pinning entries into the constraint.
FitResult equiv_c_fit(const TrainingData& data, const FunctionLibrary& lib, std::span<const Generator> gens,
                      const DiscoveryConfig& cfg);

/// Equation loss plus lambda times a symmetry loss, minimized by L-BFGS inside sequential thresholding.
FitResult equiv_r_fit(const TrainingData& data, const FunctionLibrary& lib, std::span<const Generator> gens,
                      const DiscoveryConfig& cfg);

// ---------------------------------------------------------------------------
// L-BFGS (exposed for testing)
// ---------------------------------------------------------------------------

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// f(x, grad) returns the objective and fills grad. Armijo backtracking; every accepted
/// step strictly lowers f (std::logic_error otherwise).
LbfgsResult lbfgs_minimize(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           Eigen::VectorXd x0, const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------
// Genetic programming
// ---------------------------------------------------------------------------

struct GpFitness {
    double mse = 0.0;  // normalized by the target variance
    double symm_penalty = 0.0;
    std::size_t size = 0;
    double total = 0.0;  // mse + alpha*size + lambda*symm_penalty
};

/// A per-dimension symmetry target: the GP penalty compares candidate values at g.x
/// with (J_g(x) h(x))_i, where h uses the candidate for component i and the data
/// derivatives for the others.
struct GpSymmetry {
    std::vector<Generator> generators;
    double eps = kDefaultGroupEpsilon;
    double lambda = 0.0;
};

struct GpResult {
    std::vector<Expr> equations;  // a + b*tree, per output dimension
    std::vector<GpFitness> fitness;
    std::vector<std::string> diagnostics;
};

GpResult gp_fit(const TrainingData& data, const DiscoveryConfig& cfg, const std::optional<GpSymmetry>& symmetry = {});

/// Precomputed group action on the fitness rows.
struct GpPenaltyData {
    Eigen::MatrixXd X;   // M x d
    Eigen::MatrixXd dX;  // M x d
    std::vector<Eigen::MatrixXd> moved;                   // per generator, M x d
    std::vector<std::vector<Eigen::MatrixXd>> jacobians;  // per generator, per row
};

GpPenaltyData gp_penalty_data(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX, const GpSymmetry& symmetry);

/// Fitness of candidate `tree` for output `dim` (linear scaling included). Penalty is skipped when pen is null.
GpFitness gp_fitness(const Expr& tree, int dim, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const GpConfig& cfg, const GpPenaltyData* pen, double lambda);

}  // namespace symode
