#include "symode/model.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "symode/term.hpp"

namespace symode {

Eigen::MatrixXd kron_row_identity(const Eigen::VectorXd& a, int d)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d * a.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        out.block(0, j * d, d, d).diagonal().setConstant(a[j]);
    }
    return out;
}

SindyModel::SindyModel(FunctionLibrary lib, Eigen::MatrixXd W, Provenance provenance)
    : lib_(std::move(lib)), W_(std::move(W)), provenance_(std::move(provenance))
{
    if (W_.rows() != lib_.dim() || W_.cols() != static_cast<Eigen::Index>(lib_.size())) {
        throw std::invalid_argument("coefficient matrix must be d x p for the library");
    }
}

Eigen::VectorXd SindyModel::rhs(const Eigen::VectorXd& x) const { return W_ * lib_.eval(x); }

Eigen::MatrixXd SindyModel::jacobian(const Eigen::VectorXd& x) const { return W_ * lib_.jacobian(x); }

Eigen::MatrixXd SindyModel::rhs_param_jacobian(const Eigen::VectorXd& x) const
{
    return kron_row_identity(lib_.eval(x), dim());
}

Eigen::MatrixXd SindyModel::jvp_param_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const
{
    return kron_row_identity(lib_.jacobian(x) * u, dim());
}

Eigen::MatrixXd SindyModel::jvp_state_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const
{
    return W_ * lib_.hessian_contract(x, u);
}

void SindyModel::set_coefficients(const Eigen::MatrixXd& W)
{
    if (W.rows() != W_.rows() || W.cols() != W_.cols()) {
        throw std::invalid_argument("coefficient matrix shape mismatch");
    }
    W_ = W;
}

Eigen::VectorXd SindyModel::params() const { return Eigen::Map<const Eigen::VectorXd>(W_.data(), W_.size()); }

void SindyModel::set_params(const Eigen::VectorXd& theta)
{
    if (theta.size() != W_.size()) {
        throw std::invalid_argument("parameter vector length mismatch");
    }
    W_ = Eigen::Map<const Eigen::MatrixXd>(theta.data(), W_.rows(), W_.cols());
}

std::vector<Expr> SindyModel::equations() const
{
    std::vector<Expr> out;
    for (Eigen::Index i = 0; i < W_.rows(); ++i) {
        Polynomial poly;
        for (Eigen::Index j = 0; j < W_.cols(); ++j) {
            if (W_(i, j) != 0.0) {
                poly[lib_.term(static_cast<std::size_t>(j))] = W_(i, j);
            }
        }
        out.push_back(polynomial_expr(poly));
    }
    return out;
}

std::vector<std::string> SindyModel::equation_strings(int precision) const
{
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < W_.rows(); ++i) {
        std::string text;
        for (Eigen::Index j = 0; j < W_.cols(); ++j) {
            const double c = W_(i, j);
            if (c == 0.0) {
                continue;
            }
            const TermKey& key = lib_.term(static_cast<std::size_t>(j));
            if (!text.empty()) {
                text += c < 0 ? " - " : " + ";
            } else if (c < 0) {
                text += "-";
            }
            const std::string mag = fmt::format("{:.{}g}", std::abs(c), precision);
            if (key.is_constant()) {
                text += mag;
            } else if (mag == "1") {
                text += term_name(key);
            } else {
                text += mag + "*" + term_name(key);
            }
        }
        out.push_back(text.empty() ? "0" : text);
    }
    return out;
}

}  // namespace symode
