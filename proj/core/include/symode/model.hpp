#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symode/expr.hpp"
#include "symode/funclib.hpp"
#include "symode/symmetry.hpp"

namespace symode {

struct Provenance {
    std::string method;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// h(x) = W Theta(x) over a fixed library. Parameters are theta = vec(W), column-major.
class SindyModel final : public ParametricDynamics {
public:
    SindyModel(FunctionLibrary lib, Eigen::MatrixXd W, Provenance provenance = {});

    int dim() const override { return lib_.dim(); }
    Eigen::VectorXd rhs(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;

    Eigen::Index num_params() const override { return W_.size(); }
    Eigen::MatrixXd rhs_param_jacobian(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd jvp_param_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
    Eigen::MatrixXd jvp_state_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;

    const FunctionLibrary& library() const noexcept { return lib_; }
    const Eigen::MatrixXd& coefficients() const noexcept { return W_; }
    void set_coefficients(const Eigen::MatrixXd& W);
    Eigen::VectorXd params() const;
    void set_params(const Eigen::VectorXd& theta);

    const Provenance& provenance() const noexcept { return provenance_; }
    void set_provenance(Provenance p) { provenance_ = std::move(p); }

    /// One infix expression per equation, built from the nonzero coefficients.
    std::vector<Expr> equations() const;
    /// Infix text, e.g. "-0.1*x1 - x2"; parseable back with the same variables.
    std::vector<std::string> equation_strings(int precision = 6) const;

private:
    FunctionLibrary lib_;
    Eigen::MatrixXd W_;
    Provenance provenance_;
};

/// The d x (d p) matrix a^T (x) I_d, i.e. d (W a) / d vec(W).
Eigen::MatrixXd kron_row_identity(const Eigen::VectorXd& a, int d);

}  // namespace symode
