#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace symode {

enum class NodeKind { Constant, Variable, Add, Sub, Mul, Div, Neg, Exp, Pow };

/// How Div nodes behave when the denominator vanishes.
///   Exact     - IEEE division; the result may be non-finite.
///   Protected - |den| < kProtectedDivEps evaluates to 1 (used by the GP engine only).
enum class DivisionMode { Exact, Protected };

inline constexpr double kProtectedDivEps = 1e-10;

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Immutable symbolic expression tree over variables x1..xd (0-based indices internally).
/// Copies share structure; nothing is ever mutated after construction.
class Expr {
public:
    Expr();  // constant 0

    static Expr constant(double value);
    static Expr variable(int index);
    static Expr exp(Expr arg);
    static Expr pow(Expr base, int exponent);
    static Expr add(Expr lhs, Expr rhs);
    static Expr sub(Expr lhs, Expr rhs);
    static Expr mul(Expr lhs, Expr rhs);
    static Expr div(Expr lhs, Expr rhs);
    static Expr neg(Expr arg);

    NodeKind kind() const noexcept;
    double value() const noexcept;    // Constant
    int index() const noexcept;       // Variable
    int exponent() const noexcept;    // Pow
    std::size_t arity() const noexcept;
    const Expr& child(std::size_t i) const;

    std::size_t node_count() const noexcept;
    std::size_t depth() const noexcept;
    /// Largest variable index + 1, or 0 for closed expressions.
    int min_dimension() const noexcept;

    bool is_constant() const noexcept { return kind() == NodeKind::Constant; }
    bool is_constant(double v) const noexcept { return is_constant() && value() == v; }

    /// Pointer identity; useful to detect unchanged subtrees.
    bool same_node(const Expr& other) const noexcept { return node_ == other.node_; }

    struct Node;  // implementation detail

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

/// Parses infix text. Grammar (EBNF):
///
///   expr    = term { ("+" | "-") term } ;
///   term    = unary { ("*" | "/") unary } ;
///   unary   = "-" unary | power ;
///   power   = primary [ "^" integer ] ;
///   primary = number | "x" integer | "exp" "(" expr ")" | "(" expr ")" ;
///
/// Variables are 1-based (x1..xd). Throws ParseError with the character offset.
Expr parse(std::string_view text, int dim);

/// Infix text that parses back to an expression with bit-identical evaluation.
std::string to_string(const Expr& e);

double eval(const Expr& e, std::span<const double> x, DivisionMode mode = DivisionMode::Exact);
inline double eval(const Expr& e, const Eigen::VectorXd& x, DivisionMode mode = DivisionMode::Exact)
{
    return eval(e, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), mode);
}

/// nullopt when the value is not finite.
std::optional<double> eval_finite(const Expr& e, std::span<const double> x);

/// Evaluates at every row of X (N x d) at once.
Eigen::ArrayXd eval_rows(const Expr& e, const Eigen::MatrixXd& X, DivisionMode mode = DivisionMode::Exact);

Expr differentiate(const Expr& e, int var);

/// Light algebraic cleanup: constant folding and 0/1 identities. Preserves values wherever e is finite.
Expr simplify(const Expr& e);

/// "x1" for index 0.
std::string variable_name(int index);

}  // namespace symode
