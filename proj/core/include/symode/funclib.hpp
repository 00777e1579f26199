#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symode/expr.hpp"
#include "symode/term.hpp"

namespace symode {

/// Ordered SINDy basis Theta(x): all monomials of total degree <= q over d
/// variables in graded order (constant first), optionally followed by exp(x_i).
class FunctionLibrary {
public:
    FunctionLibrary(int dim, int degree, bool include_exponentials);

    int dim() const noexcept { return dim_; }
    int degree() const noexcept { return degree_; }
    bool has_exponentials() const noexcept { return exponentials_; }
    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<TermKey>& terms() const noexcept { return terms_; }
    const TermKey& term(std::size_t i) const { return terms_.at(i); }
    std::optional<std::size_t> index_of(const TermKey& key) const;
    std::vector<std::string> term_names() const;

    Eigen::VectorXd eval(std::span<const double> x) const;
    Eigen::VectorXd eval(const Eigen::VectorXd& x) const { return eval(as_span(x)); }
    /// Row n is Theta(X.row(n)).
    Eigen::MatrixXd eval_rows(const Eigen::MatrixXd& X) const;

    /// p x d matrix of partial derivatives.
    Eigen::MatrixXd jacobian(std::span<const double> x) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const { return jacobian(as_span(x)); }

    /// p x d matrix K with K(mu, k) = sum_j d^2 Theta_mu / dx_j dx_k * u_j.
    Eigen::MatrixXd hessian_contract(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

    bool operator==(const FunctionLibrary& other) const
    {
        return dim_ == other.dim_ && degree_ == other.degree_ && exponentials_ == other.exponentials_;
    }

private:
    static std::span<const double> as_span(const Eigen::VectorXd& x)
    {
        return {x.data(), static_cast<std::size_t>(x.size())};
    }

    int dim_;
    int degree_;
    bool exponentials_;
    std::vector<TermKey> terms_;
    std::map<TermKey, std::size_t> index_;
};

FunctionLibrary build_library(int dim, int degree, bool include_exponentials = false);

/// Coefficients over library terms; zero coefficients are never stored.
struct CanonicalForm {
    std::map<TermKey, double> coeffs;
    bool operator==(const CanonicalForm&) const = default;
};

/// Expands e against lib; nullopt (not in span) when any surviving term is not a library term.
std::optional<CanonicalForm> canonicalize(const Expr& e, const FunctionLibrary& lib);

/// Coordinates of each component in span(Theta); row i belongs to component i.
std::optional<Eigen::MatrixXd> m_theta(const FunctionLibrary& lib, std::span<const Expr> components);
Eigen::RowVectorXd coordinates(const FunctionLibrary& lib, const CanonicalForm& form);

/// M with J_Theta(x) L x == M Theta(x) identically, computed symbolically.
/// Throws std::invalid_argument for libraries with exponential terms.
Eigen::MatrixXd generator_structure_matrix(const FunctionLibrary& lib, const Eigen::MatrixXd& L);

}  // namespace symode
