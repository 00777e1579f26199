#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "discover_support.hpp"
#include "symode/constraint.hpp"
#include "symode/discover.hpp"
#include "test_support.hpp"

using namespace symode;
using namespace symode::testing;

namespace {

Eigen::MatrixXd truth(const OdeSystem& s)
{
    return s.truth_matrix(system_library(s).terms());
}

}  // namespace

// ---------------------------------------------------------------------------
// STLSQ
// ---------------------------------------------------------------------------

TEST_CASE("stlsq: exact oscillator derivatives recover the true coefficients")
{
    const OdeSystem osc = get_system("oscillator");
    const TrainingData t = exact_training_data(osc, {10, 0, 0}, 1);
    const FunctionLibrary lib = system_library(osc);
    const StlsqResult r = stlsq(lib.eval_rows(t.X), t.dX, 0.05);
    const Eigen::MatrixXd W0 = truth(osc);
    CHECK((r.W - W0).cwiseAbs().maxCoeff() <= 1e-4);
    for (Eigen::Index i = 0; i < W0.rows(); ++i) {
        for (Eigen::Index j = 0; j < W0.cols(); ++j) {
            if (W0(i, j) == 0.0) {
                CHECK(r.W(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("stlsq: zero targets, zero threshold and monotone supports")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd Phi(80, 6), dX(80, 2);
    for (Eigen::Index i = 0; i < Phi.size(); ++i) {
        Phi.data()[i] = n(rng);
    }
    for (Eigen::Index i = 0; i < dX.size(); ++i) {
        dX.data()[i] = 0.3 * n(rng);
    }

    const StlsqResult zero = stlsq(Phi, Eigen::MatrixXd::Zero(80, 2), 0.05);
    CHECK(zero.W.isZero(0.0));
    CHECK(zero.rounds == 1);

    const StlsqResult plain = stlsq(Phi, dX, 0.0);
    const Eigen::MatrixXd ls = Phi.colPivHouseholderQr().solve(dX).transpose();
    CHECK((plain.W - ls).norm() <= 1e-12 * ls.norm());
    CHECK(plain.rounds == 0);

    const StlsqResult sparse = stlsq(Phi, dX, 0.05);
    for (std::size_t k = 1; k < sparse.support_history.size(); ++k) {
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(sparse.support_history[k][i] <= sparse.support_history[k - 1][i]);
        }
    }
    CHECK(sparse.W.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("stlsq: rank-deficient supports fall back to minimum norm with a warning")
{
    Eigen::MatrixXd Phi(20, 3);
    for (int i = 0; i < 20; ++i) {
        Phi(i, 0) = 1.0;
        Phi(i, 1) = 0.1 * i;
        Phi(i, 2) = 0.1 * i;  // duplicate column
    }
    const Eigen::MatrixXd dX = Phi.col(1) * 2.0;
    const StlsqResult r = stlsq(Phi, dX, 0.05);
    CHECK_FALSE(r.warnings.empty());
    CHECK(r.W(0, 1) == doctest::Approx(1.0));
    CHECK(r.W(0, 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(stlsq(Phi, dX, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(stlsq(Phi, Eigen::MatrixXd::Zero(3, 1), 0.1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Equiv-c
// ---------------------------------------------------------------------------

TEST_CASE("equiv_c_fit: clean data with an exact linear symmetry recovers the truth")
{
    for (const char* name : {"oscillator", "growth", "seir"}) {
        const OdeSystem s = get_system(name);
        const TrainingData t = exact_training_data(s, {10, 0, 0}, 2);
        const FunctionLibrary lib = system_library(s);
        DiscoveryConfig cfg;
        cfg.threshold = s.threshold;
        const FitResult r = equiv_c_fit(t, lib, s.known_generators, cfg);
        INFO(name);
        CHECK((r.model.coefficients() - truth(s)).cwiseAbs().maxCoeff() <= 1e-4);
        const EquivariantBasis basis = assemble(lib, s.known_generators);
        const Eigen::MatrixXd& W = r.model.coefficients();
        CHECK(constraint_residual(basis, W) <= 1e-9 * std::max(1.0, W.norm()));
        CHECK(r.model.provenance().method == "equiv-c");
    }
}

TEST_CASE("equiv_c_fit: output satisfies the constraint on noisy data")
{
    const OdeSystem osc = get_system("oscillator");
    GenerateOptions opts;
    opts.seed = 5;
    opts.splits = SplitSizes{10, 0, 0};
    const TrainingData t = training_data(generate_dataset(osc, opts));
    const FunctionLibrary lib = system_library(osc);
    DiscoveryConfig cfg;
    const FitResult r = equiv_c_fit(t, lib, osc.known_generators, cfg);
    const EquivariantBasis basis = assemble(lib, osc.known_generators);
    const Eigen::MatrixXd& W = r.model.coefficients();
    CHECK(constraint_residual(basis, W) <= 1e-9 * std::max(1.0, W.norm()));
    // every surviving entry clears the threshold
    CHECK(((W.array() == 0.0) || (W.array().abs() >= cfg.threshold)).all());
}

TEST_CASE("equiv_c_fit: a threshold above every coefficient collapses the nullspace")
{
    const OdeSystem g = get_system("growth");
    const TrainingData t = exact_training_data(g, {3, 0, 0}, 3);
    DiscoveryConfig cfg;
    cfg.threshold = 100.0;
    const FitResult r = equiv_c_fit(t, system_library(g), g.known_generators, cfg);
    CHECK(r.model.coefficients().isZero(0.0));
    CHECK(r.rank == 0);
    CHECK_FALSE(r.diagnostics.empty());
}

TEST_CASE("equiv_c_fit: no generators reduces to thresholded least squares")
{
    const OdeSystem osc = get_system("oscillator");
    const TrainingData t = exact_training_data(osc, {5, 0, 0}, 4);
    DiscoveryConfig cfg;
    const FitResult c = equiv_c_fit(t, system_library(osc), {}, cfg);
    CHECK((c.model.coefficients() - truth(osc)).cwiseAbs().maxCoeff() <= 1e-4);
}

// ---------------------------------------------------------------------------
// L-BFGS
// ---------------------------------------------------------------------------

TEST_CASE("lbfgs_minimize: Rosenbrock and a quadratic")
{
    auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    const LbfgsResult r = lbfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), {});
    CHECK(r.converged);
    CHECK((r.x - Eigen::Vector2d(1.0, 1.0)).norm() <= 1e-6);

    Eigen::MatrixXd H(3, 3);
    H << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    const Eigen::Vector3d c(1.0, -2.0, 0.5);
    auto quad = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = H * x - c;
        return 0.5 * x.dot(H * x) - c.dot(x);
    };
    const LbfgsResult q = lbfgs_minimize(quad, Eigen::Vector3d::Zero(), {});
    CHECK((q.x - H.ldlt().solve(c)).norm() <= 1e-8);

    auto nan = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
        g.setZero();
        return std::nan("");
    };
    CHECK_FALSE(lbfgs_minimize(nan, Eigen::Vector2d::Zero(), {}).converged);
}

TEST_CASE("lbfgs_minimize: objective never increases across accepted steps")
{
    std::vector<double> accepted;
    auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g[0] = 4.0 * std::pow(x[0] - 3.0, 3) - std::sin(x[0]);
        g[1] = 2.0 * (x[1] + 1.0);
        return std::pow(x[0] - 3.0, 4) + std::pow(x[1] + 1.0, 2) + std::cos(x[0]);
    };
    OptimizerConfig cfg;
    cfg.max_iters = 1;
    Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
    for (int it = 0; it < 30; ++it) {
        const LbfgsResult r = lbfgs_minimize(f, x, cfg);
        accepted.push_back(r.f);
        x = r.x;
    }
    for (std::size_t k = 1; k < accepted.size(); ++k) {
        CHECK(accepted[k] <= accepted[k - 1]);
    }
}

// ---------------------------------------------------------------------------
// Equiv-r
// ---------------------------------------------------------------------------

TEST_CASE("equiv_r_fit: lambda = 0 matches stlsq")
{
    const OdeSystem osc = get_system("oscillator");
    const TrainingData t = exact_training_data(osc, {10, 0, 0}, 6);
    const FunctionLibrary lib = system_library(osc);
    DiscoveryConfig cfg;
    cfg.lambda_symm = 0.0;
    const FitResult r = equiv_r_fit(t, lib, osc.known_generators, cfg);
    const StlsqResult s = stlsq(lib.eval_rows(t.X), t.dX, cfg.threshold);
    CHECK(supports(r.model.coefficients()) == supports(s.W));
    CHECK((r.model.coefficients() - s.W).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("equiv_r_fit: the truth is stationary under an exact symmetry")
{
    const OdeSystem osc = get_system("oscillator");
    const TrainingData t = exact_training_data(osc, {10, 0, 0}, 7);
    const FunctionLibrary lib = system_library(osc);
    for (LossKind kind : {LossKind::IGIE, LossKind::FGIE, LossKind::IGFE, LossKind::FGFE}) {
        DiscoveryConfig cfg;
        cfg.lambda_symm = 1.0;
        cfg.loss_kind = kind;
        cfg.batch_size = 64;
        const FitResult r = equiv_r_fit(t, lib, osc.known_generators, cfg);
        INFO(to_string(kind));
        CHECK((r.model.coefficients() - truth(osc)).cwiseAbs().maxCoeff() < 1e-4);
        LossSettings ls;
        ls.kind = kind;
        ls.tau = t.dt;
        ls.substeps = cfg.substeps;
        const LossValue v = symmetry_loss(r.model, osc.known_generators, t.X.topRows(64), ls);
        CHECK(v.value <= 1e-6);
    }
}

TEST_CASE("equiv_r_fit: lambda selection, determinism and argument checks")
{
    const OdeSystem osc = get_system("oscillator");
    GenerateOptions opts;
    opts.seed = 9;
    opts.splits = SplitSizes{5, 2, 0};
    const TrainingData t = training_data(generate_dataset(osc, opts));
    const FunctionLibrary lib = system_library(osc);
    DiscoveryConfig cfg;
    cfg.loss_kind = LossKind::IGIE;
    cfg.batch_size = 128;
    const FitResult a = equiv_r_fit(t, lib, osc.known_generators, cfg);
    const FitResult b = equiv_r_fit(t, lib, osc.known_generators, cfg);
    CHECK(a.model.coefficients() == b.model.coefficients());
    CHECK((a.lambda == 0.01 || a.lambda == 0.1 || a.lambda == 1.0));

    TrainingData no_val = t;
    no_val.X_val.resize(0, 2);
    no_val.dX_val.resize(0, 2);
    CHECK_THROWS_AS(equiv_r_fit(no_val, lib, osc.known_generators, cfg), std::invalid_argument);
    cfg.lambda_symm = -1.0;
    CHECK_THROWS_AS(equiv_r_fit(t, lib, osc.known_generators, cfg), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Genetic programming
// ---------------------------------------------------------------------------

namespace {

TrainingData exponential_growth()
{
    TrainingData t;
    t.X.resize(200, 1);
    for (int i = 0; i < 200; ++i) {
        t.X(i, 0) = 0.2 * std::exp(0.01 * i);
    }
    t.dX = t.X;
    t.dt = 0.01;
    return t;
}

}  // namespace

TEST_CASE("gp_fit: recovers xdot = x on clean data")
{
    const TrainingData t = exponential_growth();
    const FunctionLibrary lib = build_library(1, 2);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        DiscoveryConfig cfg;
        cfg.seed = seed;
        cfg.gp.generations = 30;
        const GpResult r = gp_fit(t, cfg);
        REQUIRE(r.equations.size() == 1);
        const auto form = canonicalize(r.equations[0], lib);
        if (form && form->coeffs.size() == 1 && form->coeffs.count(TermKey::monomial({1})) == 1 &&
            std::abs(form->coeffs.at(TermKey::monomial({1})) - 1.0) <= 1e-2) {
            ++hits;
        }
    }
    CHECK(hits >= 9);
}

TEST_CASE("gp_fit: deterministic under a fixed seed")
{
    const TrainingData t = exponential_growth();
    DiscoveryConfig cfg;
    cfg.seed = 42;
    cfg.gp.generations = 5;
    cfg.gp.population = 64;
    const GpResult a = gp_fit(t, cfg);
    const GpResult b = gp_fit(t, cfg);
    CHECK(to_string(a.equations[0]) == to_string(b.equations[0]));
    cfg.gp.population = 1;
    CHECK_THROWS_AS(gp_fit(t, cfg), std::invalid_argument);
}

TEST_CASE("protected division evaluates div(1, 0) to 1")
{
    const Expr e = Expr::div(Expr::constant(1.0), Expr::constant(0.0));
    const std::vector<double> x{0.0};
    CHECK(eval(e, std::span<const double>(x), DivisionMode::Protected) == 1.0);
    const Expr v = Expr::div(Expr::variable(0), Expr::variable(0));
    CHECK(std::isfinite(eval(v, std::span<const double>(x), DivisionMode::Protected)));
}

TEST_CASE("gp_fitness: the symmetry penalty only ever worsens a violating candidate")
{
    const OdeSystem osc = get_system("oscillator");
    const TrainingData t = exact_training_data(osc, {2, 0, 0}, 10);
    const GpSymmetry sym{osc.known_generators, 0.1, 1.0};
    const GpPenaltyData pen = gp_penalty_data(t.X, t.dX, sym);
    const Eigen::VectorXd y = t.dX.col(0);
    GpConfig cfg;
    const Expr bad = parse("x1*x1 + x2", 2);  // quadratic terms break rotation equivariance
    const GpFitness without = gp_fitness(bad, 0, t.X, y, cfg, nullptr, 0.0);
    const GpFitness with = gp_fitness(bad, 0, t.X, y, cfg, &pen, 1.0);
    CHECK(with.symm_penalty > 0.0);
    CHECK(with.total > without.total);
    CHECK(with.mse == without.mse);

    const Expr good = parse("-0.1*x1 - x2", 2);
    const GpFitness exact = gp_fitness(good, 0, t.X, y, cfg, &pen, 1.0);
    CHECK(exact.symm_penalty <= 1e-12);

    std::mt19937_64 rng(11);
    for (int k = 0; k < 50; ++k) {
        const Expr e = random_expr(rng, 2, 4, false);
        const GpFitness a = gp_fitness(e, 0, t.X, y, cfg, nullptr, 0.0);
        const GpFitness b = gp_fitness(e, 0, t.X, y, cfg, &pen, 1.0);
        if (std::isfinite(a.total)) {
            CHECK(b.total >= a.total);
        }
    }
}
