#include "symode/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace symode {

struct Expr::Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;
    int index = 0;
    int exponent = 0;
    std::vector<Expr> children;
    std::size_t count = 1;
    std::size_t depth = 1;
    int min_dim = 0;
};

namespace {

std::shared_ptr<const Expr::Node> finish(std::shared_ptr<Expr::Node> n)
{
    for (const auto& c : n->children) {
        n->count += c.node_count();
        n->depth = std::max(n->depth, c.depth() + 1);
        n->min_dim = std::max(n->min_dim, c.min_dimension());
    }
    return n;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " at position " + std::to_string(position)), position_(position)
{
}

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = value;
    return Expr(finish(std::move(n)));
}

Expr Expr::variable(int index)
{
    if (index < 0) {
        throw std::invalid_argument("variable index must be non-negative");
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Variable;
    n->index = index;
    n->min_dim = index + 1;
    return Expr(finish(std::move(n)));
}

namespace {

template <typename... Children>
std::shared_ptr<Expr::Node> make_node(NodeKind kind, Children&&... children)
{
    auto n = std::make_shared<Expr::Node>();
    n->kind = kind;
    (n->children.push_back(std::forward<Children>(children)), ...);
    return n;
}

}  // namespace

Expr Expr::exp(Expr arg) { return Expr(finish(make_node(NodeKind::Exp, std::move(arg)))); }
Expr Expr::add(Expr lhs, Expr rhs) { return Expr(finish(make_node(NodeKind::Add, std::move(lhs), std::move(rhs)))); }
Expr Expr::sub(Expr lhs, Expr rhs) { return Expr(finish(make_node(NodeKind::Sub, std::move(lhs), std::move(rhs)))); }
Expr Expr::mul(Expr lhs, Expr rhs) { return Expr(finish(make_node(NodeKind::Mul, std::move(lhs), std::move(rhs)))); }
Expr Expr::div(Expr lhs, Expr rhs) { return Expr(finish(make_node(NodeKind::Div, std::move(lhs), std::move(rhs)))); }
Expr Expr::neg(Expr arg) { return Expr(finish(make_node(NodeKind::Neg, std::move(arg)))); }

Expr Expr::pow(Expr base, int exponent)
{
    if (exponent < 0) {
        throw std::invalid_argument("only non-negative integer powers are supported");
    }
    auto n = make_node(NodeKind::Pow, std::move(base));
    n->exponent = exponent;
    return Expr(finish(std::move(n)));
}

NodeKind Expr::kind() const noexcept { return node_->kind; }
double Expr::value() const noexcept { return node_->value; }
int Expr::index() const noexcept { return node_->index; }
int Expr::exponent() const noexcept { return node_->exponent; }
std::size_t Expr::arity() const noexcept { return node_->children.size(); }
const Expr& Expr::child(std::size_t i) const { return node_->children.at(i); }
std::size_t Expr::node_count() const noexcept { return node_->count; }
std::size_t Expr::depth() const noexcept { return node_->depth; }
int Expr::min_dimension() const noexcept { return node_->min_dim; }

Expr operator+(const Expr& a, const Expr& b) { return Expr::add(a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sub(a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::mul(a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::div(a, b); }
Expr operator-(const Expr& a) { return Expr::neg(a); }

std::string variable_name(int index) { return "x" + std::to_string(index + 1); }

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

    Expr run()
    {
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
        }
        return e;
    }

private:
    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    Expr expr()
    {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = Expr::add(lhs, term());
            } else if (accept('-')) {
                lhs = Expr::sub(lhs, term());
            } else {
                return lhs;
            }
        }
    }

    Expr term()
    {
        Expr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = Expr::mul(lhs, unary());
            } else if (accept('/')) {
                lhs = Expr::div(lhs, unary());
            } else {
                return lhs;
            }
        }
    }

    Expr unary()
    {
        if (accept('-')) {
            return Expr::neg(unary());
        }
        return power();
    }

    Expr power()
    {
        Expr base = primary();
        if (accept('^')) {
            skip_ws();
            const std::size_t start = pos_;
            int k = 0;
            auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), k);
            if (ec != std::errc() || k < 0) {
                throw ParseError("expected non-negative integer exponent", start);
            }
            pos_ = static_cast<std::size_t>(ptr - text_.data());
            return Expr::pow(base, k);
        }
        return base;
    }

    Expr primary()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw ParseError("unexpected end of input", pos_);
        }
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (text_.substr(pos_, 3) == "exp") {
            pos_ += 3;
            expect('(');
            Expr arg = expr();
            expect(')');
            return Expr::exp(arg);
        }
        if (c == 'x') {
            const std::size_t start = pos_;
            ++pos_;
            int k = 0;
            auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), k);
            if (ec != std::errc()) {
                throw ParseError("expected variable index after 'x'", pos_);
            }
            pos_ = static_cast<std::size_t>(ptr - text_.data());
            if (k < 1 || k > dim_) {
                throw ParseError("variable x" + std::to_string(k) + " out of range for dimension " +
                                     std::to_string(dim_),
                                 start);
            }
            return Expr::variable(k - 1);
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    Expr number()
    {
        const std::size_t start = pos_;
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) {
                ++end;
            }
        };
        digits();
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            digits();
        }
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t e = end + 1;
            if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) {
                ++e;
            }
            if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
                end = e;
                digits();
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + end, v);
        if (ec != std::errc() || ptr != text_.data() + end) {
            throw ParseError("malformed number", start);
        }
        pos_ = end;
        return Expr::constant(v);
    }

    std::string_view text_;
    int dim_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, int dim)
{
    if (dim < 1) {
        throw std::invalid_argument("dimension must be positive");
    }
    return Parser(text, dim).run();
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

int precedence(const Expr& e)
{
    switch (e.kind()) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    case NodeKind::Constant: return std::signbit(e.value()) ? 0 : 5;
    case NodeKind::Variable:
    case NodeKind::Exp: return 5;
    }
    return 0;
}

std::string format_number(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& c, bool paren, std::string& out)
{
    if (paren) {
        out += '(';
    }
    print(c, out);
    if (paren) {
        out += ')';
    }
}

void print(const Expr& e, std::string& out)
{
    switch (e.kind()) {
    case NodeKind::Constant:
        if (std::signbit(e.value())) {
            out += "-";
            out += format_number(-e.value());
        } else {
            out += format_number(e.value());
        }
        return;
    case NodeKind::Variable: out += variable_name(e.index()); return;
    case NodeKind::Exp:
        out += "exp(";
        print(e.child(0), out);
        out += ')';
        return;
    case NodeKind::Neg:
        out += '-';
        print_child(e.child(0), precedence(e.child(0)) < 3, out);
        return;
    case NodeKind::Pow:
        print_child(e.child(0), precedence(e.child(0)) < 5, out);
        out += '^';
        out += std::to_string(e.exponent());
        return;
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div: {
        const int p = precedence(e);
        print_child(e.child(0), precedence(e.child(0)) < p, out);
        switch (e.kind()) {
        case NodeKind::Add: out += " + "; break;
        case NodeKind::Sub: out += " - "; break;
        case NodeKind::Mul: out += '*'; break;
        default: out += '/'; break;
        }
        print_child(e.child(1), precedence(e.child(1)) <= p, out);
        return;
    }
    }
}

}  // namespace

std::string to_string(const Expr& e)
{
    std::string out;
    print(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

inline double divide(double a, double b, DivisionMode mode)
{
    if (mode == DivisionMode::Protected && std::abs(b) < kProtectedDivEps) {
        return 1.0;
    }
    return a / b;
}

}  // namespace

double eval(const Expr& e, std::span<const double> x, DivisionMode mode)
{
    switch (e.kind()) {
    case NodeKind::Constant: return e.value();
    case NodeKind::Variable:
        if (static_cast<std::size_t>(e.index()) >= x.size()) {
            throw std::out_of_range("variable " + variable_name(e.index()) + " not present in point of size " +
                                    std::to_string(x.size()));
        }
        return x[static_cast<std::size_t>(e.index())];
    case NodeKind::Add: return eval(e.child(0), x, mode) + eval(e.child(1), x, mode);
    case NodeKind::Sub: return eval(e.child(0), x, mode) - eval(e.child(1), x, mode);
    case NodeKind::Mul: return eval(e.child(0), x, mode) * eval(e.child(1), x, mode);
    case NodeKind::Div: return divide(eval(e.child(0), x, mode), eval(e.child(1), x, mode), mode);
    case NodeKind::Neg: return -eval(e.child(0), x, mode);
    case NodeKind::Exp: return std::exp(eval(e.child(0), x, mode));
    case NodeKind::Pow: {
        const double b = eval(e.child(0), x, mode);
        double r = 1.0;
        for (int k = 0; k < e.exponent(); ++k) {
            r *= b;
        }
        return r;
    }
    }
    return 0.0;
}

std::optional<double> eval_finite(const Expr& e, std::span<const double> x)
{
    const double v = eval(e, x, DivisionMode::Exact);
    if (!std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

Eigen::ArrayXd eval_rows(const Expr& e, const Eigen::MatrixXd& X, DivisionMode mode)
{
    const Eigen::Index n = X.rows();
    switch (e.kind()) {
    case NodeKind::Constant: return Eigen::ArrayXd::Constant(n, e.value());
    case NodeKind::Variable:
        if (e.index() >= X.cols()) {
            throw std::out_of_range("variable " + variable_name(e.index()) + " not present in data");
        }
        return X.col(e.index()).array();
    case NodeKind::Add: return eval_rows(e.child(0), X, mode) + eval_rows(e.child(1), X, mode);
    case NodeKind::Sub: return eval_rows(e.child(0), X, mode) - eval_rows(e.child(1), X, mode);
    case NodeKind::Mul: return eval_rows(e.child(0), X, mode) * eval_rows(e.child(1), X, mode);
    case NodeKind::Div: {
        Eigen::ArrayXd num = eval_rows(e.child(0), X, mode);
        const Eigen::ArrayXd den = eval_rows(e.child(1), X, mode);
        for (Eigen::Index i = 0; i < n; ++i) {
            num[i] = divide(num[i], den[i], mode);
        }
        return num;
    }
    case NodeKind::Neg: return -eval_rows(e.child(0), X, mode);
    case NodeKind::Exp: return eval_rows(e.child(0), X, mode).exp();
    case NodeKind::Pow: {
        const Eigen::ArrayXd b = eval_rows(e.child(0), X, mode);
        Eigen::ArrayXd r = Eigen::ArrayXd::Ones(n);
        for (int k = 0; k < e.exponent(); ++k) {
            r *= b;
        }
        return r;
    }
    }
    return Eigen::ArrayXd::Zero(n);
}

// ---------------------------------------------------------------------------
// Simplification and differentiation
// ---------------------------------------------------------------------------

namespace {

Expr s_add(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) {
        return Expr::constant(a.value() + b.value());
    }
    if (a.is_constant(0.0)) {
        return b;
    }
    if (b.is_constant(0.0)) {
        return a;
    }
    return Expr::add(a, b);
}

Expr s_neg(const Expr& a)
{
    if (a.is_constant()) {
        return Expr::constant(-a.value());
    }
    if (a.kind() == NodeKind::Neg) {
        return a.child(0);
    }
    return Expr::neg(a);
}

Expr s_sub(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) {
        return Expr::constant(a.value() - b.value());
    }
    if (b.is_constant(0.0)) {
        return a;
    }
    if (a.is_constant(0.0)) {
        return s_neg(b);
    }
    return Expr::sub(a, b);
}

Expr s_mul(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant()) {
        return Expr::constant(a.value() * b.value());
    }
    if (a.is_constant(0.0) || b.is_constant(0.0)) {
        return Expr::constant(0.0);
    }
    if (a.is_constant(1.0)) {
        return b;
    }
    if (b.is_constant(1.0)) {
        return a;
    }
    if (a.is_constant(-1.0)) {
        return s_neg(b);
    }
    if (b.is_constant(-1.0)) {
        return s_neg(a);
    }
    return Expr::mul(a, b);
}

Expr s_div(const Expr& a, const Expr& b)
{
    if (a.is_constant() && b.is_constant() && b.value() != 0.0) {
        return Expr::constant(a.value() / b.value());
    }
    if (a.is_constant(0.0) && !(b.is_constant(0.0))) {
        return Expr::constant(0.0);
    }
    if (b.is_constant(1.0)) {
        return a;
    }
    return Expr::div(a, b);
}

Expr s_pow(const Expr& base, int k)
{
    if (k == 0) {
        return Expr::constant(1.0);
    }
    if (k == 1) {
        return base;
    }
    if (base.is_constant()) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) {
            r *= base.value();
        }
        return Expr::constant(r);
    }
    return Expr::pow(base, k);
}

Expr s_exp(const Expr& a)
{
    if (a.is_constant(0.0)) {
        return Expr::constant(1.0);
    }
    return Expr::exp(a);
}

}  // namespace

Expr simplify(const Expr& e)
{
    switch (e.kind()) {
    case NodeKind::Constant:
    case NodeKind::Variable: return e;
    case NodeKind::Add: return s_add(simplify(e.child(0)), simplify(e.child(1)));
    case NodeKind::Sub: return s_sub(simplify(e.child(0)), simplify(e.child(1)));
    case NodeKind::Mul: return s_mul(simplify(e.child(0)), simplify(e.child(1)));
    case NodeKind::Div: return s_div(simplify(e.child(0)), simplify(e.child(1)));
    case NodeKind::Neg: return s_neg(simplify(e.child(0)));
    case NodeKind::Exp: return s_exp(simplify(e.child(0)));
    case NodeKind::Pow: return s_pow(simplify(e.child(0)), e.exponent());
    }
    return e;
}

Expr differentiate(const Expr& e, int var)
{
    switch (e.kind()) {
    case NodeKind::Constant: return Expr::constant(0.0);
    case NodeKind::Variable: return Expr::constant(e.index() == var ? 1.0 : 0.0);
    case NodeKind::Add: return s_add(differentiate(e.child(0), var), differentiate(e.child(1), var));
    case NodeKind::Sub: return s_sub(differentiate(e.child(0), var), differentiate(e.child(1), var));
    case NodeKind::Neg: return s_neg(differentiate(e.child(0), var));
    case NodeKind::Mul: {
        const Expr& a = e.child(0);
        const Expr& b = e.child(1);
        return s_add(s_mul(differentiate(a, var), b), s_mul(a, differentiate(b, var)));
    }
    case NodeKind::Div: {
        const Expr& a = e.child(0);
        const Expr& b = e.child(1);
        const Expr num = s_sub(s_mul(differentiate(a, var), b), s_mul(a, differentiate(b, var)));
        return s_div(num, s_pow(b, 2));
    }
    case NodeKind::Exp: return s_mul(e, differentiate(e.child(0), var));
    case NodeKind::Pow: {
        const int k = e.exponent();
        if (k == 0) {
            return Expr::constant(0.0);
        }
        const Expr& b = e.child(0);
        return s_mul(s_mul(Expr::constant(static_cast<double>(k)), s_pow(b, k - 1)), differentiate(b, var));
    }
    }
    return Expr::constant(0.0);
}

}  // namespace symode
