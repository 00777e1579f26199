#include "symode/discover.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "symode/numeric.hpp"

namespace symode {

TrainingData training_data(const Dataset& data)
{
    TrainingData t;
    t.X = data.stacked_states(data.train);
    t.dX = data.stacked_derivs(data.train);
    if (!data.val.empty()) {
        t.X_val = data.stacked_states(data.val);
        t.dX_val = data.stacked_derivs(data.val);
    }
    t.dt = data.dt;
    return t;
}

namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// |dX - Phi W^T|_F^2 == |B - A W^T|_F^2 + rest, with A = R from a thin QR when N > p.
struct Reduced {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    double rest = 0.0;
    double rows = 0.0;  // N
};

Reduced reduce_regression(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& dX)
{
    if (Phi.rows() != dX.rows()) {
        throw std::invalid_argument("regression: Theta(X) and dX row counts differ");
    }
    if (Phi.rows() == 0) {
        throw std::invalid_argument("regression: no data rows");
    }
    Reduced r;
    r.rows = static_cast<double>(Phi.rows());
    const Eigen::Index p = Phi.cols();
    if (Phi.rows() > p) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Phi);
        r.A = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd QtdX = qr.householderQ().adjoint() * dX;
        r.B = QtdX.topRows(p);
        r.rest = QtdX.bottomRows(Phi.rows() - p).squaredNorm();
    } else {
        r.A = Phi;
        r.B = dX;
    }
    return r;
}

// Minimum-norm least squares of A(:, S) w = b for each equation's support.
Eigen::MatrixXd fit_supports(const Reduced& red, const Mask& mask, std::vector<std::string>* warnings)
{
    const Eigen::Index d = red.B.cols(), p = red.A.cols();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(d, p);
    for (Eigen::Index i = 0; i < d; ++i) {
        std::vector<Eigen::Index> S;
        for (Eigen::Index mu = 0; mu < p; ++mu) {
            if (mask(i, mu)) {
                S.push_back(mu);
            }
        }
        if (S.empty()) {
            continue;
        }
        Eigen::MatrixXd As(red.A.rows(), static_cast<Eigen::Index>(S.size()));
        for (std::size_t k = 0; k < S.size(); ++k) {
            As.col(static_cast<Eigen::Index>(k)) = red.A.col(S[k]);
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(As);
        if (warnings && cod.rank() < As.cols()) {
            warnings->push_back(fmt::format("equation {}: rank-deficient support ({} of {}); minimum-norm solution",
                                            i + 1, cod.rank(), As.cols()));
        }
        const Eigen::VectorXd w = cod.solve(red.B.col(i));
        for (std::size_t k = 0; k < S.size(); ++k) {
            W(i, S[k]) = w[static_cast<Eigen::Index>(k)];
        }
    }
    return W;
}

std::vector<int> support_counts(const Mask& mask)
{
    std::vector<int> out(static_cast<std::size_t>(mask.rows()));
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<int>(mask.row(i).count());
    }
    return out;
}

Mask threshold_mask(const Mask& mask, const Eigen::MatrixXd& W, double threshold)
{
    return mask && (W.array().abs() >= threshold);
}

void check_config(const DiscoveryConfig& cfg)
{
    if (!(cfg.threshold >= 0.0)) {
        throw std::invalid_argument("threshold must be >= 0");
    }
    if (cfg.max_rounds < 0) {
        throw std::invalid_argument("max_rounds must be >= 0");
    }
}

void check_data(const TrainingData& data, const FunctionLibrary& lib)
{
    if (data.X.cols() != lib.dim() || data.dX.cols() != lib.dim() || data.X.rows() != data.dX.rows()) {
        throw std::invalid_argument("training data shape does not match the library dimension");
    }
}

double equation_loss(const FunctionLibrary& lib, const Eigen::MatrixXd& W, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& dX)
{
    return (dX - lib.eval_rows(X) * W.transpose()).squaredNorm() / static_cast<double>(X.rows());
}

}  // namespace

StlsqResult stlsq(const Eigen::MatrixXd& Theta_X, const Eigen::MatrixXd& dX, double threshold, int max_rounds)
{
    if (!(threshold >= 0.0)) {
        throw std::invalid_argument("stlsq: threshold must be >= 0");
    }
    StlsqResult out;
    if (Theta_X.rows() < Theta_X.cols()) {
        out.warnings.push_back(fmt::format("fewer samples ({}) than library terms ({})", Theta_X.rows(), Theta_X.cols()));
    }
    const Reduced red = reduce_regression(Theta_X, dX);
    Mask mask = Mask::Constant(dX.cols(), Theta_X.cols(), true);
    out.W = fit_supports(red, mask, &out.warnings);
    out.support_history.push_back(support_counts(mask));
    for (int round = 0; round < max_rounds; ++round) {
        const Mask next = threshold_mask(mask, out.W, threshold);
        if ((next == mask).all()) {
            break;
        }
        mask = next;
        out.W = fit_supports(red, mask, &out.warnings);
        out.support_history.push_back(support_counts(mask));
        ++out.rounds;
    }
    return out;
}

FitResult sindy_fit(const TrainingData& data, const FunctionLibrary& lib, const DiscoveryConfig& cfg)
{
    check_config(cfg);
    check_data(data, lib);
    StlsqResult s = stlsq(lib.eval_rows(data.X), data.dX, cfg.threshold, cfg.max_rounds);
    FitResult r(SindyModel(lib, s.W, {"sindy", cfg.config_hash, cfg.seed}));
    r.rounds = s.rounds;
    r.diagnostics = std::move(s.warnings);
    return r;
}

// ---------------------------------------------------------------------------
// Equiv-c
// ---------------------------------------------------------------------------

namespace {

// Columns of (A W_k^T) for every basis matrix W_k = unvec(Q e_k), column-major vec.
Eigen::MatrixXd beta_design(const Reduced& red, const EquivariantBasis& basis)
{
    const Eigen::Index m = red.A.rows(), d = basis.dim;
    Eigen::MatrixXd G(m * d, basis.r);
    for (int k = 0; k < basis.r; ++k) {
        const Eigen::Map<const Eigen::MatrixXd> Wk(basis.Q.col(k).data(), d, basis.num_terms);
        const Eigen::MatrixXd P = red.A * Wk.transpose();
        G.col(k) = P.reshaped();
    }
    return G;
}

}  // namespace

FitResult equiv_c_fit(const TrainingData& data, const FunctionLibrary& lib, std::span<const Generator> gens,
                      const DiscoveryConfig& cfg)
{
    check_config(cfg);
    check_data(data, lib);
    EquivariantBasis basis = assemble(lib, gens);
    const Reduced red = reduce_regression(lib.eval_rows(data.X), data.dX);
    const int d = lib.dim();
    const auto p = static_cast<Eigen::Index>(lib.size());
    const Eigen::VectorXd target = red.B.reshaped();

    FitResult out(SindyModel(lib, Eigen::MatrixXd::Zero(d, p), {"equiv-c", cfg.config_hash, cfg.seed}));
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(d, p);
    for (int round = 0; round <= cfg.max_rounds; ++round) {
        if (basis.r == 0) {
            W.setZero();
            out.diagnostics.push_back(fmt::format("round {}: nullspace collapsed to r = 0; returning W = 0", round));
            break;
        }
        const Eigen::MatrixXd G = beta_design(red, basis);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
        if (cod.rank() < G.cols()) {
            out.diagnostics.push_back(
                fmt::format("round {}: rank-deficient beta design ({} of {})", round, cod.rank(), G.cols()));
        }
        W = materialize(basis, cod.solve(target));
        for (const auto& [eq, term] : basis.pinned) {
            W(eq, term) = 0.0;
        }
        const double residual = constraint_residual(basis, W);
        if (residual > 1e-9 * std::max(1.0, W.norm())) {
            throw std::logic_error(fmt::format("equiv-c: constraint residual {:.3e} in round {}", residual, round));
        }
        out.rounds = round;

        std::vector<std::pair<int, int>> pins;
        if (cfg.threshold > 0.0 && round < cfg.max_rounds) {
            for (Eigen::Index mu = 0; mu < p; ++mu) {
                for (int i = 0; i < d; ++i) {
                    const Eigen::Index row = mu * d + i;
                    const bool free_entry = basis.Q.row(row).norm() > 1e-12;
                    if (free_entry && std::abs(W(i, mu)) < cfg.threshold) {
                        pins.emplace_back(i, static_cast<int>(mu));
                    }
                }
            }
        }
        if (pins.empty()) {
            break;
        }
        basis = pin_entries(basis, pins);
    }
    out.rank = basis.r;
    out.model.set_coefficients(W);
    return out;
}

// ---------------------------------------------------------------------------
// L-BFGS
// ---------------------------------------------------------------------------

LbfgsResult lbfgs_minimize(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
                           Eigen::VectorXd x0, const OptimizerConfig& cfg)
{
    constexpr double c1 = 1e-4;
    constexpr int max_backtracks = 50;
    LbfgsResult res;
    res.x = std::move(x0);
    Eigen::VectorXd g(res.x.size());
    res.f = f(res.x, g);
    if (!std::isfinite(res.f)) {
        return res;  // caller decides; converged stays false
    }
    if (res.x.size() == 0) {
        res.converged = true;
        return res;
    }
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
    Eigen::VectorXd gn(res.x.size());

    for (res.iterations = 0; res.iterations < cfg.max_iters; ++res.iterations) {
        if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
            res.converged = true;
            return res;
        }
        // two-loop recursion
        Eigen::VectorXd q = g;
        std::vector<double> alpha(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
            const auto& [s, y] = memory[k];
            alpha[k] = s.dot(q) / y.dot(s);
            q -= alpha[k] * y;
        }
        if (!memory.empty()) {
            const auto& [s, y] = memory.back();
            q *= s.dot(y) / y.squaredNorm();
        } else {
            q /= std::max(1.0, g.lpNorm<Eigen::Infinity>());
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const auto& [s, y] = memory[k];
            const double beta = y.dot(q) / y.dot(s);
            q += (alpha[k] - beta) * s;
        }
        Eigen::VectorXd dir = -q;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            memory.clear();
            dir = -g / std::max(1.0, g.lpNorm<Eigen::Infinity>());
            slope = g.dot(dir);
        }

        bool accepted = false;
        double fn = 0.0;
        Eigen::VectorXd xn;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double t = 1.0;
            for (int b = 0; b < max_backtracks; ++b, t *= 0.5) {
                xn = res.x + t * dir;
                fn = f(xn, gn);
                if (std::isfinite(fn) && fn <= res.f + c1 * t * slope && fn < res.f) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted && !memory.empty()) {
                memory.clear();  // retry once along steepest descent
                dir = -g / std::max(1.0, g.lpNorm<Eigen::Infinity>());
                slope = g.dot(dir);
            } else {
                break;
            }
        }
        if (!accepted) {
            return res;  // no decrease available at working precision
        }
        if (!(fn < res.f)) {
            throw std::logic_error("lbfgs: accepted step did not lower the objective");
        }
        const Eigen::VectorXd s = xn - res.x;
        const Eigen::VectorXd y = gn - g;
        const double drop = res.f - fn;
        res.x = xn;
        res.f = fn;
        g = gn;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.emplace_back(s, y);
            if (static_cast<int>(memory.size()) > cfg.memory) {
                memory.pop_front();
            }
        }
        if (drop <= 1e-15 * std::max(1.0, std::abs(fn))) {
            res.converged = true;  // stalled at working precision
            ++res.iterations;
            return res;
        }
    }
    res.converged = g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol;
    return res;
}

// ---------------------------------------------------------------------------
// Equiv-r
// ---------------------------------------------------------------------------

namespace {

struct EquivR {
    const FunctionLibrary& lib;
    const Reduced& red;
    std::span<const Generator> gens;
    const Eigen::MatrixXd& batch;
    const TransformedBatch* pre;  // FGIE only
    LossSettings settings;
    OptimizerConfig opt;

    // Objective over the free entries of W.
    double objective(const Eigen::MatrixXd& W, double lambda, Eigen::MatrixXd* grad) const
    {
        const Eigen::MatrixXd E = red.B - red.A * W.transpose();
        double F = (E.squaredNorm() + red.rest) / red.rows;
        if (grad) {
            *grad = (-2.0 / red.rows) * (E.transpose() * red.A);
        }
        if (lambda == 0.0 || gens.empty()) {
            return F;
        }
        const SindyModel model(lib, W);
        LossValue lv;
        try {
            if (pre) {
                lv = grad ? loss_fgie_grad(model, *pre) : loss_fgie(model, *pre);
            } else {
                lv = grad ? symmetry_loss_grad(model, gens, batch, settings)
                          : symmetry_loss(model, gens, batch, settings);
            }
        } catch (const DegenerateLossError&) {
            return F;  // every pair degenerate: the symmetry term carries no signal
        } catch (const DivergenceError&) {
            return std::numeric_limits<double>::infinity();
        }
        F += lambda * lv.value;
        if (grad) {
            *grad += lambda * lv.gradient.reshaped(W.rows(), W.cols());
        }
        return F;
    }

    struct Outcome {
        Eigen::MatrixXd W;
        int rounds = 0;
        bool converged = true;
        std::vector<std::string> notes;
    };

    Outcome fit(double lambda, double threshold, int max_rounds) const
    {
        const Eigen::Index d = red.B.cols(), p = red.A.cols();
        Outcome out;
        Mask mask = Mask::Constant(d, p, true);
        for (int round = 0;; ++round) {
            // warm start at the unregularized optimum on this support
            Eigen::MatrixXd W = fit_supports(red, mask, &out.notes);
            std::vector<Eigen::Index> free;
            for (Eigen::Index k = 0; k < d * p; ++k) {
                if (mask.reshaped()(k)) {
                    free.push_back(k);
                }
            }
            if (lambda > 0.0 && !gens.empty() && !free.empty()) {
                auto f = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
                    Eigen::MatrixXd Wz = Eigen::MatrixXd::Zero(d, p);
                    for (std::size_t k = 0; k < free.size(); ++k) {
                        Wz.reshaped()(free[k]) = z[static_cast<Eigen::Index>(k)];
                    }
                    Eigen::MatrixXd G;
                    const double F = objective(Wz, lambda, &G);
                    for (std::size_t k = 0; k < free.size(); ++k) {
                        g[static_cast<Eigen::Index>(k)] = G.reshaped()(free[k]);
                    }
                    return F;
                };
                Eigen::VectorXd z(static_cast<Eigen::Index>(free.size()));
                for (std::size_t k = 0; k < free.size(); ++k) {
                    z[static_cast<Eigen::Index>(k)] = W.reshaped()(free[k]);
                }
                const LbfgsResult r = lbfgs_minimize(f, z, opt);
                if (!std::isfinite(r.f)) {
                    throw std::runtime_error("equiv-r: non-finite objective at the warm start");
                }
                out.converged = out.converged && r.converged;
                if (!r.converged) {
                    out.notes.push_back(fmt::format("round {}: optimizer stopped after {} iterations without "
                                                    "meeting the gradient tolerance; best iterate kept",
                                                    round, r.iterations));
                }
                W.setZero();
                for (std::size_t k = 0; k < free.size(); ++k) {
                    W.reshaped()(free[k]) = r.x[static_cast<Eigen::Index>(k)];
                }
            }
            out.W = W;
            out.rounds = round;
            if (round >= max_rounds) {
                break;
            }
            const Mask next = threshold_mask(mask, W, threshold);
            if ((next == mask).all()) {
                break;
            }
            mask = next;
        }
        return out;
    }
};

}  // namespace

FitResult equiv_r_fit(const TrainingData& data, const FunctionLibrary& lib, std::span<const Generator> gens,
                      const DiscoveryConfig& cfg)
{
    check_config(cfg);
    check_data(data, lib);
    if (cfg.lambda_symm && !(*cfg.lambda_symm >= 0.0)) {
        throw std::invalid_argument("lambda_symm must be >= 0");
    }
    for (const double l : cfg.lambda_grid) {
        if (!(l >= 0.0)) {
            throw std::invalid_argument("lambda grid values must be >= 0");
        }
    }
    const Reduced red = reduce_regression(lib.eval_rows(data.X), data.dX);

    LossSettings settings;
    settings.kind = cfg.loss_kind;
    settings.tau = cfg.tau > 0.0 ? cfg.tau : data.dt;
    settings.epsilon = cfg.eps;
    settings.substeps = cfg.substeps;
    const bool needs_tau = cfg.loss_kind == LossKind::IGFE || cfg.loss_kind == LossKind::FGFE;
    if (needs_tau && !(settings.tau > 0.0)) {
        throw std::invalid_argument("equiv-r: flow losses need tau > 0 (set tau or the data dt)");
    }

    // fixed-seed subsample of training states for the symmetry term
    const auto N = static_cast<std::size_t>(data.X.rows());
    const std::size_t nb = std::min<std::size_t>(N, static_cast<std::size_t>(std::max(cfg.batch_size, 1)));
    std::vector<std::size_t> all(N), pick;
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(split_seed(cfg.seed, 0x5eed));
    std::sample(all.begin(), all.end(), std::back_inserter(pick), nb, rng);
    Eigen::MatrixXd batch(static_cast<Eigen::Index>(nb), data.X.cols());
    for (std::size_t k = 0; k < nb; ++k) {
        batch.row(static_cast<Eigen::Index>(k)) = data.X.row(static_cast<Eigen::Index>(pick[k]));
    }
    std::optional<TransformedBatch> pre;
    if (cfg.loss_kind == LossKind::FGIE && !gens.empty()) {
        pre = precompute_group_action(gens, batch, cfg.eps, cfg.substeps);
    }
    const EquivR engine{lib, red, gens, batch, pre ? &*pre : nullptr, settings, cfg.optimizer};

    std::vector<double> lambdas = cfg.lambda_symm ? std::vector<double>{*cfg.lambda_symm} : cfg.lambda_grid;
    if (gens.empty()) {
        lambdas = {0.0};
    }
    if (lambdas.empty()) {
        throw std::invalid_argument("equiv-r: empty lambda grid");
    }
    const bool tuning = lambdas.size() > 1;
    if (tuning && data.X_val.rows() == 0) {
        throw std::invalid_argument("equiv-r: tuning lambda needs validation data");
    }

    FitResult best(SindyModel(lib, Eigen::MatrixXd::Zero(lib.dim(), static_cast<Eigen::Index>(lib.size())),
                              {"equiv-r", cfg.config_hash, cfg.seed}));
    double best_val = std::numeric_limits<double>::infinity();
    bool have = false;
    for (double lambda : lambdas) {
        EquivR::Outcome o;
        double used = lambda;
        std::string halved;
        try {
            o = engine.fit(lambda, cfg.threshold, cfg.max_rounds);
        } catch (const std::runtime_error&) {
            used = lambda / 2.0;  // one retry with a weaker regularizer
            o = engine.fit(used, cfg.threshold, cfg.max_rounds);
            halved = fmt::format("lambda {} gave a non-finite objective; halved to {}", lambda, used);
        }
        const double v = tuning ? equation_loss(lib, o.W, data.X_val, data.dX_val) : 0.0;
        if (!have || v < best_val) {
            have = true;
            best_val = v;
            best.model.set_coefficients(o.W);
            best.rounds = o.rounds;
            best.converged = o.converged;
            best.lambda = used;
            best.diagnostics = std::move(o.notes);
            if (!halved.empty()) {
                best.diagnostics.push_back(halved);
            }
        }
    }
    if (tuning) {
        best.diagnostics.push_back(fmt::format("lambda {} chosen on validation equation loss {:.6e}", best.lambda,
                                               best_val));
    }
    return best;
}

}  // namespace symode
