#include "symode/term.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace symode {

TermKey TermKey::one(int dim)
{
    return TermKey{std::vector<int>(static_cast<std::size_t>(dim), 0), std::vector<int>(static_cast<std::size_t>(dim), 0)};
}

TermKey TermKey::monomial(std::vector<int> powers)
{
    TermKey k;
    k.exps.assign(powers.size(), 0);
    k.powers = std::move(powers);
    return k;
}

TermKey TermKey::exponential(int dim, int var)
{
    TermKey k = one(dim);
    k.exps.at(static_cast<std::size_t>(var)) = 1;
    return k;
}

int TermKey::total_degree() const noexcept { return std::accumulate(powers.begin(), powers.end(), 0); }
int TermKey::exp_count() const noexcept { return std::accumulate(exps.begin(), exps.end(), 0); }

std::strong_ordering TermKey::operator<=>(const TermKey& other) const
{
    if (auto c = exp_count() <=> other.exp_count(); c != 0) {
        return c;
    }
    if (auto c = total_degree() <=> other.total_degree(); c != 0) {
        return c;
    }
    // Higher power of an earlier variable sorts first: x1^2 < x1*x2 < x2^2.
    if (auto c = other.powers <=> powers; c != 0) {
        return c;
    }
    return other.exps <=> exps;
}

TermKey TermKey::operator*(const TermKey& other) const
{
    if (dim() != other.dim()) {
        throw std::invalid_argument("term dimension mismatch");
    }
    TermKey r = *this;
    for (std::size_t i = 0; i < r.powers.size(); ++i) {
        r.powers[i] += other.powers[i];
        r.exps[i] += other.exps[i];
    }
    return r;
}

std::string term_name(const TermKey& key)
{
    std::string out;
    auto append = [&](const std::string& s) {
        if (!out.empty()) {
            out += '*';
        }
        out += s;
    };
    for (int i = 0; i < key.dim(); ++i) {
        const int p = key.powers[static_cast<std::size_t>(i)];
        if (p == 1) {
            append(variable_name(i));
        } else if (p > 1) {
            append(variable_name(i) + "^" + std::to_string(p));
        }
    }
    std::string exp_arg;
    for (int i = 0; i < key.dim(); ++i) {
        const int m = key.exps[static_cast<std::size_t>(i)];
        if (m == 0) {
            continue;
        }
        if (!exp_arg.empty()) {
            exp_arg += " + ";
        }
        exp_arg += (m == 1 ? "" : std::to_string(m) + "*") + variable_name(i);
    }
    if (!exp_arg.empty()) {
        append("exp(" + exp_arg + ")");
    }
    return out.empty() ? "1" : out;
}

Expr term_expr(const TermKey& key)
{
    std::optional<Expr> acc;
    auto push = [&](Expr f) { acc = acc ? Expr::mul(*acc, f) : f; };
    for (int i = 0; i < key.dim(); ++i) {
        const int p = key.powers[static_cast<std::size_t>(i)];
        if (p == 1) {
            push(Expr::variable(i));
        } else if (p > 1) {
            push(Expr::pow(Expr::variable(i), p));
        }
    }
    std::optional<Expr> arg;
    for (int i = 0; i < key.dim(); ++i) {
        const int m = key.exps[static_cast<std::size_t>(i)];
        if (m == 0) {
            continue;
        }
        Expr t = m == 1 ? Expr::variable(i) : Expr::mul(Expr::constant(m), Expr::variable(i));
        arg = arg ? Expr::add(*arg, t) : t;
    }
    if (arg) {
        push(Expr::exp(*arg));
    }
    return acc ? *acc : Expr::constant(1.0);
}

double eval_term(const TermKey& key, const double* x)
{
    double v = 1.0;
    double arg = 0.0;
    for (std::size_t i = 0; i < key.powers.size(); ++i) {
        for (int k = 0; k < key.powers[i]; ++k) {
            v *= x[i];
        }
        arg += key.exps[i] * x[i];
    }
    return arg == 0.0 ? v : v * std::exp(arg);
}

namespace {

struct Expander {
    int dim;
    ExpandLimits limits;

    static void accumulate(Polynomial& p, const TermKey& k, double c)
    {
        p[k] += c;
    }

    bool within_limits(const Polynomial& p) const
    {
        if (p.size() > limits.max_terms) {
            return false;
        }
        for (const auto& [k, c] : p) {
            if (k.total_degree() > limits.max_total_degree) {
                return false;
            }
        }
        return true;
    }

    static void prune(Polynomial& p)
    {
        std::erase_if(p, [](const auto& kv) { return std::abs(kv.second) < kCoefficientDropTol; });
    }

    static std::optional<double> as_constant(const Polynomial& p, int dim)
    {
        if (p.empty()) {
            return 0.0;
        }
        if (p.size() == 1 && p.begin()->first == TermKey::one(dim)) {
            return p.begin()->second;
        }
        return std::nullopt;
    }

    std::optional<Polynomial> multiply(const Polynomial& a, const Polynomial& b) const
    {
        Polynomial r;
        for (const auto& [ka, ca] : a) {
            for (const auto& [kb, cb] : b) {
                accumulate(r, ka * kb, ca * cb);
            }
        }
        prune(r);
        if (!within_limits(r)) {
            return std::nullopt;
        }
        return r;
    }

    std::optional<Polynomial> run(const Expr& e) const
    {
        switch (e.kind()) {
        case NodeKind::Constant: {
            if (!std::isfinite(e.value())) {
                return std::nullopt;
            }
            Polynomial p;
            if (std::abs(e.value()) >= kCoefficientDropTol) {
                p[TermKey::one(dim)] = e.value();
            }
            return p;
        }
        case NodeKind::Variable: {
            if (e.index() >= dim) {
                return std::nullopt;
            }
            TermKey k = TermKey::one(dim);
            k.powers[static_cast<std::size_t>(e.index())] = 1;
            return Polynomial{{k, 1.0}};
        }
        case NodeKind::Add:
        case NodeKind::Sub: {
            auto a = run(e.child(0));
            if (!a) {
                return std::nullopt;
            }
            auto b = run(e.child(1));
            if (!b) {
                return std::nullopt;
            }
            const double s = e.kind() == NodeKind::Add ? 1.0 : -1.0;
            for (const auto& [k, c] : *b) {
                accumulate(*a, k, s * c);
            }
            prune(*a);
            if (!within_limits(*a)) {
                return std::nullopt;
            }
            return a;
        }
        case NodeKind::Neg: {
            auto a = run(e.child(0));
            if (a) {
                for (auto& kv : *a) {
                    kv.second = -kv.second;
                }
            }
            return a;
        }
        case NodeKind::Mul: {
            auto a = run(e.child(0));
            if (!a) {
                return std::nullopt;
            }
            auto b = run(e.child(1));
            if (!b) {
                return std::nullopt;
            }
            return multiply(*a, *b);
        }
        case NodeKind::Div: {
            auto b = run(e.child(1));
            if (!b) {
                return std::nullopt;
            }
            const auto den = as_constant(*b, dim);
            if (!den || *den == 0.0) {
                return std::nullopt;
            }
            auto a = run(e.child(0));
            if (!a) {
                return std::nullopt;
            }
            for (auto& kv : *a) {
                kv.second /= *den;
            }
            prune(*a);
            return a;
        }
        case NodeKind::Pow: {
            auto base = run(e.child(0));
            if (!base) {
                return std::nullopt;
            }
            Polynomial r{{TermKey::one(dim), 1.0}};
            for (int k = 0; k < e.exponent(); ++k) {
                auto next = multiply(r, *base);
                if (!next) {
                    return std::nullopt;
                }
                r = std::move(*next);
            }
            return r;
        }
        case NodeKind::Exp: {
            auto arg = run(e.child(0));
            if (!arg) {
                return std::nullopt;
            }
            // exp(c) or exp(x_i + c) = e^c * exp(x_i)
            double shift = 0.0;
            std::optional<int> var;
            for (const auto& [k, c] : *arg) {
                if (k.is_constant()) {
                    shift = c;
                    continue;
                }
                if (k.exp_count() != 0 || k.total_degree() != 1 || c != 1.0 || var) {
                    return std::nullopt;
                }
                for (int i = 0; i < dim; ++i) {
                    if (k.powers[static_cast<std::size_t>(i)] == 1) {
                        var = i;
                    }
                }
            }
            const double scale = std::exp(shift);
            if (!std::isfinite(scale)) {
                return std::nullopt;
            }
            TermKey k = var ? TermKey::exponential(dim, *var) : TermKey::one(dim);
            return Polynomial{{k, scale}};
        }
        }
        return std::nullopt;
    }
};

}  // namespace

std::optional<Polynomial> expand(const Expr& e, int dim, const ExpandLimits& limits)
{
    if (e.min_dimension() > dim) {
        return std::nullopt;
    }
    return Expander{dim, limits}.run(e);
}

Expr polynomial_expr(const Polynomial& poly)
{
    std::optional<Expr> acc;
    for (const auto& [k, c] : poly) {
        Expr t = k.is_constant() ? Expr::constant(c) : Expr::mul(Expr::constant(c), term_expr(k));
        acc = acc ? Expr::add(*acc, t) : t;
    }
    return acc ? *acc : Expr::constant(0.0);
}

}  // namespace symode
