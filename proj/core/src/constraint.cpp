#include "symode/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "symode/term.hpp"

namespace symode {

Eigen::MatrixXd constraint_block(const Eigen::MatrixXd& M, const Eigen::MatrixXd& L)
{
    if (M.rows() != M.cols() || L.rows() != L.cols()) {
        throw std::invalid_argument("constraint_block: M and L must be square");
    }
    const auto p = M.rows();
    const auto d = L.rows();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d * p, d * p);
    // block (a, b) of size d x d is -M(b, a) I_d, plus L on the diagonal blocks
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) {
            if (M(b, a) != 0.0) {
                B.block(a * d, b * d, d, d).diagonal().array() -= M(b, a);
            }
        }
        B.block(a * d, a * d, d, d) += L;
    }
    return B;
}

namespace {

int rank_at(const Eigen::VectorXd& sv, double rel)
{
    if (sv.size() == 0 || sv[0] == 0.0) {
        return 0;
    }
    const double cut = rel * sv[0];
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cut) {
            ++rank;
        }
    }
    return rank;
}

// The SVD returns an arbitrary orthonormal basis of the nullspace. Rotate it into a
// reproducible, sparse one: reduced row echelon form of Q^T, then Gram-Schmidt in
// row order (which leaves rows with disjoint supports untouched).
Eigen::MatrixXd canonical_basis(const Eigen::MatrixXd& Q)
{
    Eigen::MatrixXd R = Q.transpose();
    const Eigen::Index r = R.rows(), n = R.cols();
    Eigen::Index row = 0;
    for (Eigen::Index col = 0; col < n && row < r; ++col) {
        Eigen::Index piv = row;
        R.col(col).segment(row, r - row).cwiseAbs().maxCoeff(&piv);
        piv += row;
        if (std::abs(R(piv, col)) < 1e-9) {
            continue;
        }
        R.row(row).swap(R.row(piv));
        R.row(row) /= R(row, col);
        for (Eigen::Index k = 0; k < r; ++k) {
            if (k != row && R(k, col) != 0.0) {
                R.row(k) -= R(k, col) * R.row(row);
            }
        }
        ++row;
    }
    R = R.unaryExpr([](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; });
    for (Eigen::Index k = 0; k < r; ++k) {
        for (Eigen::Index j = 0; j < k; ++j) {
            R.row(k) -= R.row(j).dot(R.row(k)) * R.row(j);
        }
        R.row(k).normalize();
    }
    return R.transpose();
}

void solve_nullspace(EquivariantBasis& b)
{
    const Eigen::Index n = static_cast<Eigen::Index>(b.dim) * b.num_terms;
    if (b.C.rows() == 0) {
        b.singular_values.resize(0);
        b.Q = Eigen::MatrixXd::Identity(n, n);
        b.r = static_cast<int>(n);
        b.largest_dropped = 0.0;
        b.smallest_kept = 0.0;
        b.rank_stable = true;
        return;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.C, Eigen::ComputeFullV);
    b.singular_values = svd.singularValues();
    const int rank = rank_at(b.singular_values, kNullspaceRelTol);
    b.r = static_cast<int>(n) - rank;
    b.Q = canonical_basis(svd.matrixV().rightCols(b.r));
    b.smallest_kept = rank > 0 ? b.singular_values[rank - 1] : 0.0;
    b.largest_dropped = rank < b.singular_values.size() ? b.singular_values[rank] : 0.0;
    b.rank_stable = rank_at(b.singular_values, kNullspaceRelTol * 10.0) == rank &&
                    rank_at(b.singular_values, kNullspaceRelTol / 10.0) == rank;
}

}  // namespace

EquivariantBasis assemble(const FunctionLibrary& lib, std::span<const Generator> gens)
{
    if (lib.has_exponentials()) {
        throw std::invalid_argument("constraints need a pure polynomial library");
    }
    EquivariantBasis b;
    b.dim = lib.dim();
    b.num_terms = static_cast<int>(lib.size());
    const Eigen::Index n = static_cast<Eigen::Index>(b.dim) * b.num_terms;
    for (const Generator& g : gens) {
        if (g.dim() != lib.dim()) {
            throw std::invalid_argument("generator '" + g.label() + "' has the wrong dimension");
        }
        auto L = g.linear_matrix();
        if (!L) {
            throw std::invalid_argument("generator '" + g.label() + "' is not linear; use regularization instead");
        }
        b.structures.push_back(generator_structure_matrix(lib, *L));
        b.generators.push_back(std::move(*L));
    }
    b.C.resize(static_cast<Eigen::Index>(gens.size()) * n, n);
    for (std::size_t k = 0; k < gens.size(); ++k) {
        b.C.middleRows(static_cast<Eigen::Index>(k) * n, n) = constraint_block(b.structures[k], b.generators[k]);
    }
    solve_nullspace(b);
    return b;
}

EquivariantBasis pin_entries(const EquivariantBasis& basis, const std::vector<std::pair<int, int>>& entries)
{
    EquivariantBasis b = basis;
    const Eigen::Index n = static_cast<Eigen::Index>(b.dim) * b.num_terms;
    std::vector<std::pair<int, int>> fresh;
    for (const auto& e : entries) {
        if (e.first < 0 || e.first >= b.dim || e.second < 0 || e.second >= b.num_terms) {
            throw std::out_of_range("pinned entry outside the coefficient matrix");
        }
        if (std::find(b.pinned.begin(), b.pinned.end(), e) == b.pinned.end()) {
            fresh.push_back(e);
            b.pinned.push_back(e);
        }
    }
    if (fresh.empty()) {
        return b;
    }
    const Eigen::Index old_rows = b.C.rows();
    b.C.conservativeResize(old_rows + static_cast<Eigen::Index>(fresh.size()), n);
    b.C.bottomRows(static_cast<Eigen::Index>(fresh.size())).setZero();
    for (std::size_t k = 0; k < fresh.size(); ++k) {
        b.C(old_rows + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(fresh[k].second) * b.dim + fresh[k].first) = 1.0;
    }
    solve_nullspace(b);
    return b;
}

Eigen::MatrixXd materialize(const EquivariantBasis& basis, const Eigen::VectorXd& beta)
{
    if (beta.size() != basis.r) {
        throw std::invalid_argument("beta length must equal the nullspace dimension");
    }
    const Eigen::VectorXd w = basis.Q * beta;
    return Eigen::Map<const Eigen::MatrixXd>(w.data(), basis.dim, basis.num_terms);
}

Eigen::MatrixXd project(const EquivariantBasis& basis, const Eigen::MatrixXd& W)
{
    if (W.rows() != basis.dim || W.cols() != basis.num_terms) {
        throw std::invalid_argument("coefficient matrix shape does not match the basis");
    }
    const Eigen::Map<const Eigen::VectorXd> w(W.data(), W.size());
    return materialize(basis, basis.Q.transpose() * w);
}

double constraint_residual(const EquivariantBasis& basis, const Eigen::MatrixXd& W)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < basis.generators.size(); ++k) {
        worst = std::max(worst, (basis.generators[k] * W - W * basis.structures[k]).norm());
    }
    return worst;
}

std::vector<std::vector<std::string>> basis_templates(const EquivariantBasis& basis, const FunctionLibrary& lib)
{
    std::vector<std::vector<std::string>> out;
    for (int c = 0; c < basis.r; ++c) {
        const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(basis.Q.col(c).data(), basis.dim, basis.num_terms);
        std::vector<std::string> eqs;
        for (int i = 0; i < basis.dim; ++i) {
            std::string rhs;
            for (int j = 0; j < basis.num_terms; ++j) {
                const double q = W(i, j);
                if (std::abs(q) < 1e-12) {
                    continue;
                }
                if (!rhs.empty()) {
                    rhs += q < 0 ? " - " : " + ";
                } else if (q < 0) {
                    rhs += "-";
                }
                rhs += fmt::format("{:.4g}*{}", std::abs(q), term_name(lib.term(static_cast<std::size_t>(j))));
            }
            eqs.push_back(fmt::format("d{} = {}", variable_name(i), rhs.empty() ? "0" : rhs));
        }
        out.push_back(std::move(eqs));
    }
    return out;
}

}  // namespace symode
