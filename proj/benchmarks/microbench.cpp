#include <random>

#include <Eigen/Dense>
#include <benchmark/benchmark.h>

#include "symode/constraint.hpp"
#include "symode/discover.hpp"
#include "symode/dynamics.hpp"
#include "symode/funclib.hpp"
#include "symode/model.hpp"
#include "symode/symmetry.hpp"

using namespace symode;

namespace {

FunctionLibrary library_for(const OdeSystem& s)
{
    return build_library(s.dim, s.library_degree, s.library_exponentials);
}

Eigen::MatrixXd points(const OdeSystem& s, int n)
{
    std::mt19937_64 rng(1);
    Eigen::MatrixXd X(n, s.dim);
    for (int i = 0; i < n; ++i) {
        X.row(i) = sample_initial(s, rng).transpose();
    }
    return X;
}

void BM_LibraryEval(benchmark::State& state)
{
    const OdeSystem s = get_system("seir");
    const FunctionLibrary lib = library_for(s);
    const Eigen::MatrixXd X = points(s, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(lib.eval_rows(X));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LibraryEval)->Arg(100)->Arg(1000)->Arg(10000);

void BM_AssembleBasis(benchmark::State& state)
{
    const OdeSystem s = get_system("seir");
    const FunctionLibrary lib = library_for(s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble(lib, s.known_generators));
    }
}
BENCHMARK(BM_AssembleBasis)->Unit(benchmark::kMillisecond);

void BM_Rk4(benchmark::State& state)
{
    const OdeSystem s = get_system("oscillator");
    const ExprDynamics h = s.dynamics();
    const VectorField f = [&h](const Eigen::VectorXd& x) { return h.rhs(x); };
    const Eigen::VectorXd x0 = Eigen::Vector2d(1.0, 0.5);
    const long n = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rk4_integrate(f, x0, 0.01, n, 1));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Rk4)->Arg(1000)->Arg(10000);

void BM_Stlsq(benchmark::State& state)
{
    const OdeSystem s = get_system("oscillator");
    const FunctionLibrary lib = library_for(s);
    const Eigen::MatrixXd X = points(s, static_cast<int>(state.range(0)));
    const Eigen::MatrixXd Theta = lib.eval_rows(X);
    const Eigen::MatrixXd dX = Theta * s.truth_matrix(lib.terms()).transpose();
    for (auto _ : state) {
        benchmark::DoNotOptimize(stlsq(Theta, dX, s.threshold));
    }
}
BENCHMARK(BM_Stlsq)->Arg(1000)->Arg(5000);

void BM_LossGrad(benchmark::State& state)
{
    const OdeSystem s = get_system("oscillator");
    const FunctionLibrary lib = library_for(s);
    const SindyModel m(lib, s.truth_matrix(lib.terms()));
    const Eigen::MatrixXd X = points(s, 64);
    LossSettings cfg;
    cfg.kind = static_cast<LossKind>(state.range(0));
    cfg.tau = s.dt;
    for (auto _ : state) {
        benchmark::DoNotOptimize(symmetry_loss_grad(m, s.known_generators, X, cfg));
    }
}
BENCHMARK(BM_LossGrad)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_GpSmooth(benchmark::State& state)
{
    const OdeSystem s = get_system("oscillator");
    std::mt19937_64 rng(3);
    const ExprDynamics h = s.dynamics();
    const VectorField f = [&h](const Eigen::VectorXd& x) { return h.rhs(x); };
    const Trajectory clean = rk4_integrate(f, sample_initial(s, rng), s.dt, state.range(0), 1);
    const Trajectory noisy = add_noise(clean, NoiseSpec{NoiseKind::AdditiveRelative, 0.2, 5});
    for (auto _ : state) {
        benchmark::DoNotOptimize(gp_smooth(noisy));
    }
}
BENCHMARK(BM_GpSmooth)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
