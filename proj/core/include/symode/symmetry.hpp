#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "symode/expr.hpp"
#include "symode/numeric.hpp"

namespace symode {

inline constexpr int kDefaultFlowSubsteps = 64;
inline constexpr double kDefaultGroupEpsilon = 0.1;
/// Loss terms whose denominator falls below this are skipped and counted.
inline constexpr double kLossDenominatorFloor = 1e-30;

/// Infinitesimal generator of a one-parameter symmetry group, acting on phase space.
/// Either a linear vector field v(x) = L x or a closed-form time-independent field.
class Generator {
public:
    static Generator linear(Eigen::MatrixXd L, std::string label = {});
    static Generator symbolic(std::vector<Expr> components, std::string label = {});
    /// Components given as infix text over x1..xd.
    static Generator symbolic(const std::vector<std::string>& components, std::string label = {});

    int dim() const noexcept { return dim_; }
    bool is_linear() const noexcept { return std::holds_alternative<Eigen::MatrixXd>(rep_); }
    const std::string& label() const noexcept { return label_; }

    /// Linear generators only.
    const Eigen::MatrixXd& matrix() const;
    /// Symbolic generators only.
    const std::vector<Expr>& components() const;

    /// Matrix of the field when it is homogeneous linear (for symbolic generators,
    /// determined by expansion); nullopt otherwise.
    std::optional<Eigen::MatrixXd> linear_matrix() const;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

private:
    struct Symbolic {
        std::vector<Expr> components;
        std::vector<std::vector<Expr>> partials;  // partials[i][j] = d v_i / d x_j
    };

    Generator(std::variant<Eigen::MatrixXd, Symbolic> rep, int dim, std::string label)
        : rep_(std::move(rep)), dim_(dim), label_(std::move(label))
    {
    }

    std::variant<Eigen::MatrixXd, Symbolic> rep_;
    int dim_;
    std::string label_;
};

/// g = exp(epsilon * v).
struct GroupElement {
    Generator generator;
    double epsilon = 0.0;

    GroupElement inverse() const { return {generator, -epsilon}; }
};

/// exp(eps * L) by scaling and squaring with a degree-18 Taylor kernel.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& L, double eps = 1.0);

/// g . x. Symbolic generators integrate y' = v(y) over [0, epsilon] with RK4.
Eigen::VectorXd act(const GroupElement& g, const Eigen::VectorXd& x, int steps = kDefaultFlowSubsteps);

/// Jacobian of x -> g . x. Symbolic generators integrate the variational equation alongside the flow.
Eigen::MatrixXd act_jacobian(const GroupElement& g, const Eigen::VectorXd& x, int steps = kDefaultFlowSubsteps);

/// Vector field h(x) of an autonomous ODE together with its flow map.
class DynamicsOracle {
public:
    virtual ~DynamicsOracle() = default;

    virtual int dim() const = 0;
    virtual Eigen::VectorXd rhs(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const = 0;

    /// f_tau(x) by RK4 with the given number of substeps.
    Eigen::VectorXd flow(const Eigen::VectorXd& x, double tau, int substeps = kDefaultFlowSubsteps) const;

    struct FlowJvp {
        Eigen::VectorXd state;    // f_tau(x)
        Eigen::VectorXd tangent;  // J_{f_tau}(x) u
    };
    /// Integrates delta' = J_h(y) delta, delta(0) = u, alongside the flow.
    FlowJvp flow_jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double tau,
                     int substeps = kDefaultFlowSubsteps) const;
};

/// h given by d symbolic components; the Jacobian is differentiated symbolically once.
class ExprDynamics final : public DynamicsOracle {
public:
    explicit ExprDynamics(std::vector<Expr> components);

    int dim() const override { return static_cast<int>(components_.size()); }
    Eigen::VectorXd rhs(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
    const std::vector<Expr>& components() const noexcept { return components_; }

private:
    std::vector<Expr> components_;
    std::vector<std::vector<Expr>> partials_;
};

/// A DynamicsOracle whose field depends smoothly on a parameter vector theta.
/// Supplies the extra derivatives needed for analytic loss gradients.
class ParametricDynamics : public DynamicsOracle {
public:
    virtual Eigen::Index num_params() const = 0;
    /// d h(x) / d theta, d x P.
    virtual Eigen::MatrixXd rhs_param_jacobian(const Eigen::VectorXd& x) const = 0;
    /// d (J_h(x) u) / d theta, d x P.
    virtual Eigen::MatrixXd jvp_param_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
    /// d (J_h(x) u) / d x, d x d.
    virtual Eigen::MatrixXd jvp_state_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
};

struct CriterionReport {
    double max_residual = 0.0;   // max of |J_h v - J_v h| / (1 + |J_v h|)
    double mean_residual = 0.0;
    double max_abs_residual = 0.0;  // max of |J_h v - J_v h|
    std::size_t samples = 0;
    bool consistent = false;
};

/// Checks J_h(x) v(x) = J_v(x) h(x) on the sample points (rows of samples).
CriterionReport check_infinitesimal_criterion(const DynamicsOracle& h, const Generator& gen,
                                              const Eigen::MatrixXd& samples, double tol = 1e-8);

enum class LossKind { IGFE, FGFE, FGIE, IGIE };

std::string to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);

struct LossValue {
    double value = 0.0;
    std::size_t evaluated = 0;  // (point, generator) pairs contributing
    std::size_t skipped = 0;    // pairs dropped for a degenerate denominator
    Eigen::VectorXd gradient;   // d value / d theta; empty unless requested
};

/// A degenerate batch: every (point, generator) pair was skipped.
class DegenerateLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// g . x and J_g(x) for every generator and batch point, computed once.
struct TransformedBatch {
    Eigen::MatrixXd points;                            // N x d
    std::vector<Generator> generators;
    double epsilon = kDefaultGroupEpsilon;
    std::vector<Eigen::MatrixXd> moved;                // per generator: N x d rows of g . x
    std::vector<std::vector<Eigen::MatrixXd>> jacobians;  // per generator, per point: J_g(x)
};

TransformedBatch precompute_group_action(std::span<const Generator> gens, const Eigen::MatrixXd& batch, double eps,
                                         int substeps = kDefaultFlowSubsteps);

// Relative symmetry losses, averaged over non-degenerate (point, generator) pairs.
// Batches hold one point per row. An empty generator list gives 0.

LossValue loss_igfe(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double tau,
                    int substeps = kDefaultFlowSubsteps);
LossValue loss_fgfe(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double tau,
                    double eps, int substeps = kDefaultFlowSubsteps);
LossValue loss_fgie(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch, double eps,
                    int substeps = kDefaultFlowSubsteps);
LossValue loss_fgie(const DynamicsOracle& h, const TransformedBatch& pre);
LossValue loss_igie(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch);

// Same losses with d/dtheta filled in.

LossValue loss_igfe_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                         double tau, int substeps = kDefaultFlowSubsteps);
LossValue loss_fgfe_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                         double tau, double eps, int substeps = kDefaultFlowSubsteps);
LossValue loss_fgie_grad(const ParametricDynamics& h, const TransformedBatch& pre);
LossValue loss_igie_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch);

struct LossSettings {
    LossKind kind = LossKind::IGFE;
    double tau = 0.0;  // 0: use the data sampling interval
    double epsilon = kDefaultGroupEpsilon;
    int substeps = kDefaultFlowSubsteps;
};

/// Dispatches on settings.kind; FGIE precomputes the group action internally.
LossValue symmetry_loss(const DynamicsOracle& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                        const LossSettings& settings);
LossValue symmetry_loss_grad(const ParametricDynamics& h, std::span<const Generator> gens, const Eigen::MatrixXd& batch,
                             const LossSettings& settings);

/// Flow of a parametric field together with d/dtheta of the state and of a transported tangent.
struct FlowSensitivity {
    Eigen::VectorXd state;
    Eigen::MatrixXd state_sens;  // d f_tau(x) / d theta
    Eigen::VectorXd tangent;     // J_{f_tau}(x) u
    Eigen::MatrixXd tangent_sens;
};
FlowSensitivity flow_sensitivity(const ParametricDynamics& h, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 double tau, int substeps = kDefaultFlowSubsteps);

}  // namespace symode
