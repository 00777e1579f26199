#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symode/expr.hpp"

namespace symode {

/// A basis term prod_i x_i^powers[i] * exp(sum_i exps[i] * x_i).
/// Library terms are either pure monomials or a single exp(x_i); expansion
/// can produce mixed keys, which then simply fail to match a library term.
struct TermKey {
    std::vector<int> powers;
    std::vector<int> exps;

    static TermKey one(int dim);
    static TermKey monomial(std::vector<int> powers);
    static TermKey exponential(int dim, int var);

    int dim() const noexcept { return static_cast<int>(powers.size()); }
    int total_degree() const noexcept;
    int exp_count() const noexcept;
    bool is_constant() const noexcept { return total_degree() == 0 && exp_count() == 0; }

    /// Graded order: monomials by total degree, within a degree lexicographically
    /// with higher powers of earlier variables first; exponential terms last.
    std::strong_ordering operator<=>(const TermKey& other) const;
    bool operator==(const TermKey& other) const = default;

    TermKey operator*(const TermKey& other) const;
};

/// "1", "x1", "x1*x2^2", "exp(x2)".
std::string term_name(const TermKey& key);

Expr term_expr(const TermKey& key);
double eval_term(const TermKey& key, const double* x);

/// Linear combination of term keys; zero coefficients are not stored by expand().
using Polynomial = std::map<TermKey, double>;

struct ExpandLimits {
    int max_total_degree = 24;
    std::size_t max_terms = 20000;
};

/// Coefficients with |c| below this are dropped after expansion.
inline constexpr double kCoefficientDropTol = 1e-12;

/// Expands e into a linear combination of TermKeys by distributing products
/// and expanding integer powers. Division is accepted only by a nonzero
/// constant denominator; exp() only of a constant or of x_i + c. Anything
/// else (or an expansion exceeding the limits) yields nullopt.
std::optional<Polynomial> expand(const Expr& e, int dim, const ExpandLimits& limits = {});

/// Rebuilds a sum-of-terms expression in key order.
Expr polynomial_expr(const Polynomial& poly);

}  // namespace symode
