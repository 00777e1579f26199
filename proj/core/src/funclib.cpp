#include "symode/funclib.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace symode {

namespace {

// All exponent vectors of exactly total degree k, earlier variables getting higher powers first.
void monomials_of_degree(int dim, int k, std::vector<int>& current, int var, std::vector<TermKey>& out)
{
    if (var == dim - 1) {
        current[static_cast<std::size_t>(var)] = k;
        out.push_back(TermKey::monomial(current));
        return;
    }
    for (int e = k; e >= 0; --e) {
        current[static_cast<std::size_t>(var)] = e;
        monomials_of_degree(dim, k - e, current, var + 1, out);
    }
}

double ipow(double b, int k)
{
    double r = 1.0;
    for (int i = 0; i < k; ++i) {
        r *= b;
    }
    return r;
}

}  // namespace

FunctionLibrary::FunctionLibrary(int dim, int degree, bool include_exponentials)
    : dim_(dim), degree_(degree), exponentials_(include_exponentials)
{
    if (dim < 1) {
        throw std::invalid_argument("library dimension must be positive");
    }
    if (degree < 0) {
        throw std::invalid_argument("library degree must be non-negative");
    }
    std::vector<int> current(static_cast<std::size_t>(dim), 0);
    for (int k = 0; k <= degree; ++k) {
        monomials_of_degree(dim, k, current, 0, terms_);
    }
    if (include_exponentials) {
        for (int i = 0; i < dim; ++i) {
            terms_.push_back(TermKey::exponential(dim, i));
        }
    }
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        index_.emplace(terms_[i], i);
    }
}

FunctionLibrary build_library(int dim, int degree, bool include_exponentials)
{
    return FunctionLibrary(dim, degree, include_exponentials);
}

std::optional<std::size_t> FunctionLibrary::index_of(const TermKey& key) const
{
    auto it = index_.find(key);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::string> FunctionLibrary::term_names() const
{
    std::vector<std::string> names;
    names.reserve(terms_.size());
    for (const auto& t : terms_) {
        names.push_back(term_name(t));
    }
    return names;
}

Eigen::VectorXd FunctionLibrary::eval(std::span<const double> x) const
{
    if (x.size() != static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("point dimension does not match library");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(terms_.size()));
    for (std::size_t mu = 0; mu < terms_.size(); ++mu) {
        out[static_cast<Eigen::Index>(mu)] = eval_term(terms_[mu], x.data());
    }
    return out;
}

Eigen::MatrixXd FunctionLibrary::eval_rows(const Eigen::MatrixXd& X) const
{
    if (X.cols() != dim_) {
        throw std::invalid_argument("data dimension does not match library");
    }
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(terms_.size()));
    for (std::size_t mu = 0; mu < terms_.size(); ++mu) {
        const TermKey& t = terms_[mu];
        Eigen::ArrayXd col = Eigen::ArrayXd::Ones(X.rows());
        for (int i = 0; i < dim_; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            for (int k = 0; k < t.powers[iu]; ++k) {
                col *= X.col(i).array();
            }
            if (t.exps[iu] != 0) {
                col *= (t.exps[iu] * X.col(i).array()).exp();
            }
        }
        out.col(static_cast<Eigen::Index>(mu)) = col;
    }
    return out;
}

Eigen::MatrixXd FunctionLibrary::jacobian(std::span<const double> x) const
{
    if (x.size() != static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("point dimension does not match library");
    }
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(terms_.size()), dim_);
    for (std::size_t mu = 0; mu < terms_.size(); ++mu) {
        const TermKey& t = terms_[mu];
        if (t.exp_count() > 0) {
            for (int j = 0; j < dim_; ++j) {
                const int m = t.exps[static_cast<std::size_t>(j)];
                if (m != 0) {
                    J(static_cast<Eigen::Index>(mu), j) = m * eval_term(t, x.data());
                }
            }
            continue;
        }
        for (int j = 0; j < dim_; ++j) {
            const int pj = t.powers[static_cast<std::size_t>(j)];
            if (pj == 0) {
                continue;
            }
            double v = pj * ipow(x[static_cast<std::size_t>(j)], pj - 1);
            for (int i = 0; i < dim_; ++i) {
                if (i != j) {
                    v *= ipow(x[static_cast<std::size_t>(i)], t.powers[static_cast<std::size_t>(i)]);
                }
            }
            J(static_cast<Eigen::Index>(mu), j) = v;
        }
    }
    return J;
}

Eigen::MatrixXd FunctionLibrary::hessian_contract(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const
{
    const auto p = static_cast<Eigen::Index>(terms_.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(p, dim_);
    for (Eigen::Index mu = 0; mu < p; ++mu) {
        const TermKey& t = terms_[static_cast<std::size_t>(mu)];
        if (t.exp_count() > 0) {
            const double v = eval_term(t, x.data());
            for (int j = 0; j < dim_; ++j) {
                for (int k = 0; k < dim_; ++k) {
                    K(mu, k) += t.exps[static_cast<std::size_t>(j)] * t.exps[static_cast<std::size_t>(k)] * v * u[j];
                }
            }
            continue;
        }
        for (int j = 0; j < dim_; ++j) {
            for (int k = 0; k < dim_; ++k) {
                // d^2/dx_j dx_k of prod_i x_i^p_i
                std::vector<int> pw = t.powers;
                double c = 1.0;
                c *= pw[static_cast<std::size_t>(j)];
                pw[static_cast<std::size_t>(j)] -= 1;
                if (c == 0.0) {
                    continue;
                }
                c *= pw[static_cast<std::size_t>(k)];
                pw[static_cast<std::size_t>(k)] -= 1;
                if (c == 0.0) {
                    continue;
                }
                double v = c;
                for (int i = 0; i < dim_; ++i) {
                    v *= ipow(x[i], pw[static_cast<std::size_t>(i)]);
                }
                K(mu, k) += v * u[j];
            }
        }
    }
    return K;
}

std::optional<CanonicalForm> canonicalize(const Expr& e, const FunctionLibrary& lib)
{
    auto poly = expand(e, lib.dim());
    if (!poly) {
        return std::nullopt;
    }
    CanonicalForm form;
    for (const auto& [k, c] : *poly) {
        if (std::abs(c) < kCoefficientDropTol) {
            continue;
        }
        if (!lib.index_of(k)) {
            return std::nullopt;
        }
        form.coeffs.emplace(k, c);
    }
    return form;
}

Eigen::RowVectorXd coordinates(const FunctionLibrary& lib, const CanonicalForm& form)
{
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(lib.size()));
    for (const auto& [k, c] : form.coeffs) {
        auto idx = lib.index_of(k);
        if (!idx) {
            throw std::invalid_argument("term " + term_name(k) + " is not in the library");
        }
        row[static_cast<Eigen::Index>(*idx)] = c;
    }
    return row;
}

std::optional<Eigen::MatrixXd> m_theta(const FunctionLibrary& lib, std::span<const Expr> components)
{
    Eigen::MatrixXd M(static_cast<Eigen::Index>(components.size()), static_cast<Eigen::Index>(lib.size()));
    for (std::size_t i = 0; i < components.size(); ++i) {
        auto form = canonicalize(components[i], lib);
        if (!form) {
            return std::nullopt;
        }
        M.row(static_cast<Eigen::Index>(i)) = coordinates(lib, *form);
    }
    return M;
}

Eigen::MatrixXd generator_structure_matrix(const FunctionLibrary& lib, const Eigen::MatrixXd& L)
{
    if (lib.has_exponentials()) {
        throw std::invalid_argument("generator structure matrix requires a purely polynomial library");
    }
    const int d = lib.dim();
    if (L.rows() != d || L.cols() != d) {
        throw std::invalid_argument("generator matrix must be d x d");
    }
    // (L x)_j as expressions
    std::vector<Expr> lx;
    for (int j = 0; j < d; ++j) {
        Expr acc = Expr::constant(0.0);
        for (int k = 0; k < d; ++k) {
            if (L(j, k) != 0.0) {
                acc = Expr::add(acc, Expr::mul(Expr::constant(L(j, k)), Expr::variable(k)));
            }
        }
        lx.push_back(acc);
    }
    std::vector<Expr> rows;
    rows.reserve(lib.size());
    for (const TermKey& t : lib.terms()) {
        const Expr theta = term_expr(t);
        Expr acc = Expr::constant(0.0);
        for (int j = 0; j < d; ++j) {
            acc = Expr::add(acc, Expr::mul(differentiate(theta, j), lx[static_cast<std::size_t>(j)]));
        }
        rows.push_back(acc);
    }
    auto M = m_theta(lib, rows);
    if (!M) {
        throw std::logic_error("polynomial library not closed under the linear generator");
    }
    return *M;
}

}  // namespace symode
