#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "symode/funclib.hpp"
#include "symode/symmetry.hpp"

namespace symode {

/// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kNullspaceRelTol = 1e-10;

/// Parametrization vec(W) = Q beta of all coefficient matrices W (d x p) satisfying
/// L W = W M for every assembled generator. vec is column-major throughout.
struct EquivariantBasis {
    int dim = 0;        // d
    int num_terms = 0;  // p
    Eigen::MatrixXd C;  // stacked constraint rows, (k d p) x (d p) plus any pin rows
    Eigen::MatrixXd Q;  // (d p) x r, orthonormal columns
    Eigen::VectorXd singular_values;  // descending, length min(rows, d p)
    int r = 0;

    std::vector<Eigen::MatrixXd> generators;  // L_k
    std::vector<Eigen::MatrixXd> structures;  // M_k
    std::vector<std::pair<int, int>> pinned;  // (equation, term) entries forced to 0

    // Spectral gap around the rank cut: the largest singular value treated as zero
    // (0 if none) and the smallest kept (0 if none).
    double largest_dropped = 0.0;
    double smallest_kept = 0.0;
    /// r is unchanged when the relative threshold is scaled by 10 or 1/10.
    bool rank_stable = true;
};

/// -M^T (x) I_d + I_p (x) L; annihilates vec(W) exactly when L W = W M.
Eigen::MatrixXd constraint_block(const Eigen::MatrixXd& M, const Eigen::MatrixXd& L);

/// Linear generators (or symbolic ones that expand to homogeneous linear fields) over a polynomial library.
EquivariantBasis assemble(const FunctionLibrary& lib, std::span<const Generator> gens);

/// Adds rows e_(term*d + eq)^T to C for the given entries and recomputes the nullspace.
EquivariantBasis pin_entries(const EquivariantBasis& basis, const std::vector<std::pair<int, int>>& entries);

/// unvec(Q beta) as a d x p matrix.
Eigen::MatrixXd materialize(const EquivariantBasis& basis, const Eigen::VectorXd& beta);

/// Orthogonal projection of W onto the constraint set.
Eigen::MatrixXd project(const EquivariantBasis& basis, const Eigen::MatrixXd& W);

/// max over generators of |L W - W M|_F.
double constraint_residual(const EquivariantBasis& basis, const Eigen::MatrixXd& W);

/// Each basis column rendered as equation templates, e.g. "dx1 = 0.707*x2".
std::vector<std::vector<std::string>> basis_templates(const EquivariantBasis& basis, const FunctionLibrary& lib);

}  // namespace symode
