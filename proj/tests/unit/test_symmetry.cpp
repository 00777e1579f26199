#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "symode/model.hpp"
#include "symode/symmetry.hpp"
#include "test_support.hpp"

using namespace symode;

namespace {

Eigen::MatrixXd rotation_matrix()
{
    Eigen::MatrixXd L(2, 2);
    L << 0, 1, -1, 0;
    return L;
}

Generator rotation() { return Generator::linear(rotation_matrix(), "rotation"); }

Generator scaling_symbolic() { return Generator::symbolic(std::vector<std::string>{"2*x1", "x2"}, "scaling"); }

Generator scaling_linear()
{
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(2, 2);
    L(0, 0) = 2;
    L(1, 1) = 1;
    return Generator::linear(L, "scaling");
}

ExprDynamics dyn(std::vector<std::string> comps)
{
    const int d = static_cast<int>(comps.size());
    std::vector<Expr> e;
    for (auto& c : comps) {
        e.push_back(parse(c, d));
    }
    return ExprDynamics(std::move(e));
}

ExprDynamics oscillator() { return dyn({"-0.1*x1 - x2", "x1 - 0.1*x2"}); }
ExprDynamics growth() { return dyn({"-0.3*x1 + 0.1*x2^2", "x2"}); }

Eigen::MatrixXd oscillator_truth()
{
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 6);
    W(0, 1) = -0.1;
    W(0, 2) = -1.0;
    W(1, 1) = 1.0;
    W(1, 2) = -0.1;
    return W;
}

Eigen::MatrixXd annulus_batch(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> r(0.5, 2.0), a(0.0, 2.0 * std::numbers::pi);
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
        const double rr = r(rng), aa = a(rng);
        X(i, 0) = rr * std::cos(aa);
        X(i, 1) = rr * std::sin(aa);
    }
    return X;
}

Eigen::MatrixXd box_batch(std::mt19937_64& rng, int n, double lo, double hi)
{
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
        X.row(i) = testing::random_point(rng, 2, lo, hi).transpose();
    }
    return X;
}

// Counts field evaluations; used to show which losses integrate the flow of h.
class CountingDynamics final : public DynamicsOracle {
public:
    explicit CountingDynamics(const DynamicsOracle& inner) : inner_(inner) {}
    int dim() const override { return inner_.dim(); }
    Eigen::VectorXd rhs(const Eigen::VectorXd& x) const override
    {
        ++rhs_calls;
        return inner_.rhs(x);
    }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override { return inner_.jacobian(x); }
    mutable long rhs_calls = 0;

private:
    const DynamicsOracle& inner_;
};

class ZeroField final : public DynamicsOracle {
public:
    int dim() const override { return 2; }
    Eigen::VectorXd rhs(const Eigen::VectorXd&) const override { return Eigen::VectorXd::Zero(2); }
    Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return Eigen::MatrixXd::Zero(2, 2); }
};

}  // namespace

TEST_CASE("matrix_exponential: closed forms")
{
    const double half_pi = std::numbers::pi / 2.0;
    const Eigen::MatrixXd E = matrix_exponential(rotation_matrix(), half_pi);
    CHECK((E - rotation_matrix()).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK(matrix_exponential(Eigen::MatrixXd::Zero(3, 3), 2.0).isApprox(Eigen::MatrixXd::Identity(3, 3), 0.0));

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
    D(0, 0) = 2;
    D(1, 1) = 1;
    const Eigen::MatrixXd ED = matrix_exponential(D, std::log(2.0));
    CHECK(ED(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(ED(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(ED(0, 1) == 0.0);
}

TEST_CASE("matrix_exponential: rotation over a range of angles")
{
    for (double eps = -10.0; eps <= 10.0; eps += 0.37) {
        const Eigen::MatrixXd E = matrix_exponential(rotation_matrix(), eps);
        Eigen::MatrixXd want(2, 2);
        want << std::cos(eps), std::sin(eps), -std::sin(eps), std::cos(eps);
        CHECK((E - want).norm() <= 1e-12 * want.norm());
    }
}

TEST_CASE("matrix_exponential: symmetric matrices against eigendecomposition")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd A(4, 4);
        for (int i = 0; i < 16; ++i) {
            A.data()[i] = n(rng);
        }
        A = 0.5 * (A + A.transpose()).eval();
        A *= 10.0 / A.norm();  // |A| = 10 in Frobenius norm
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        const Eigen::MatrixXd want =
            es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() * es.eigenvectors().transpose();
        const Eigen::MatrixXd got = matrix_exponential(A);
        CHECK((got - want).norm() <= 1e-12 * want.norm());
    }
}

TEST_CASE("act: worked examples")
{
    const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
    const Eigen::VectorXd y = act({rotation(), std::numbers::pi / 2.0}, x);
    CHECK(std::abs(y[0]) <= 1e-12);
    CHECK(y[1] == doctest::Approx(-1.0).epsilon(1e-12));

    const Eigen::VectorXd z = (Eigen::VectorXd(2) << 0.3, -2.0).finished();
    CHECK(act({scaling_symbolic(), 0.0}, z) == z);
    CHECK(act({rotation(), 0.0}, z) == z);

    for (double a : {0.5, 2.0, 3.0}) {
        const Eigen::VectorXd one = Eigen::VectorXd::Ones(2);
        const Eigen::VectorXd s = act({scaling_symbolic(), std::log(a)}, one);
        CHECK(s[0] == doctest::Approx(a * a).epsilon(1e-7));
        CHECK(s[1] == doctest::Approx(a).epsilon(1e-7));
        const Eigen::VectorXd l = act({scaling_linear(), std::log(a)}, one);
        CHECK(l[0] == doctest::Approx(a * a).epsilon(1e-13));
        CHECK(l[1] == doctest::Approx(a).epsilon(1e-13));
    }
}

TEST_CASE("act_jacobian: linear, identity, and integrated scaling")
{
    std::mt19937_64 rng(8);
    const Eigen::VectorXd x = testing::random_point(rng, 2);
    const GroupElement g{rotation(), 0.7};
    CHECK(act_jacobian(g, x) == matrix_exponential(rotation_matrix(), 0.7));
    CHECK(act_jacobian({scaling_symbolic(), 0.0}, x).isIdentity(0.0));
    for (double a : {0.5, 3.0}) {
        const Eigen::MatrixXd J = act_jacobian({scaling_symbolic(), std::log(a)}, x);
        CHECK(J(0, 0) == doctest::Approx(a * a).epsilon(1e-7));
        CHECK(J(1, 1) == doctest::Approx(a).epsilon(1e-7));
        CHECK(std::abs(J(0, 1)) <= 1e-12);
        CHECK(std::abs(J(1, 0)) <= 1e-12);
    }
}

TEST_CASE("act_jacobian of a nonlinear generator matches finite differences")
{
    const Generator g = Generator::symbolic(std::vector<std::string>{"x2", "-x1 + 0.3*x1^2"});
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd x = testing::random_point(rng, 2, -0.8, 0.8);
        const GroupElement ge{g, 0.4};
        const Eigen::MatrixXd J = act_jacobian(ge, x);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                const double fd = testing::central_difference([&](const Eigen::VectorXd& y) { return act(ge, y)[i]; }, x, j);
                CHECK(std::abs(J(i, j) - fd) <= 1e-7);
            }
        }
    }
}

TEST_CASE("property: group inverse undoes the action")
{
    std::mt19937_64 rng(4);
    const std::vector<Generator> gens{rotation(), scaling_symbolic(),
                                      Generator::symbolic(std::vector<std::string>{"x2", "-x1 + 0.3*x1^2"})};
    for (const Generator& g : gens) {
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::VectorXd x = testing::random_point(rng, 2, -0.8, 0.8);
            const GroupElement ge{g, std::uniform_real_distribution<double>(-0.5, 0.5)(rng)};
            const Eigen::VectorXd back = act(ge, act(ge.inverse(), x));
            CHECK((back - x).norm() <= 1e-8);
        }
    }
}

TEST_CASE("property: linear actions are linear in x")
{
    std::mt19937_64 rng(6);
    const GroupElement g{rotation(), 1.3};
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = testing::random_point(rng, 2), y = testing::random_point(rng, 2);
        const double a = 1.7, b = -0.4;
        const Eigen::VectorXd lhs = act(g, a * x + b * y);
        const Eigen::VectorXd rhs = a * act(g, x) + b * act(g, y);
        CHECK((lhs - rhs).norm() <= 1e-14 * (1.0 + lhs.norm()));
    }
}

TEST_CASE("infinitesimal action and its Jacobian")
{
    const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.4, -1.2).finished();
    const Eigen::VectorXd v = rotation()(x);
    CHECK(v[0] == -1.2);
    CHECK(v[1] == -0.4);
    CHECK(Generator::linear(Eigen::MatrixXd::Zero(2, 2))(x).isZero(0.0));

    const Generator seir = Generator::symbolic(std::vector<std::string>{"0", "0", "0", "x1 + x2 + x3 + x4"});
    const Eigen::VectorXd s = (Eigen::VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const Eigen::MatrixXd J = seir.jacobian(s);
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(4, 4);
    want.row(3).setOnes();
    CHECK(J == want);
    CHECK(seir(s)[3] == doctest::Approx(1.0));
    REQUIRE(seir.linear_matrix().has_value());
    CHECK(*seir.linear_matrix() == want);
    CHECK_FALSE(Generator::symbolic(std::vector<std::string>{"x2", "-x1 + 0.3*x1^2"}).linear_matrix().has_value());
    CHECK_FALSE(Generator::symbolic(std::vector<std::string>{"x2 + 1", "x1"}).linear_matrix().has_value());
}

TEST_CASE("generator construction rejects bad input")
{
    CHECK_THROWS_AS(Generator::linear(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(Generator::linear(bad), std::invalid_argument);
    CHECK_THROWS_AS(Generator::symbolic(std::vector<std::string>{"x3", "x1"}), ParseError);
}

TEST_CASE("infinitesimal criterion: worked examples")
{
    std::mt19937_64 rng(10);
    const Eigen::MatrixXd X = box_batch(rng, 200, -2.0, 2.0);
    const CriterionReport osc = check_infinitesimal_criterion(oscillator(), rotation(), X);
    CHECK(osc.max_residual <= 1e-12);
    CHECK(osc.consistent);
    CHECK(osc.samples == 200);

    const CriterionReport gro = check_infinitesimal_criterion(growth(), scaling_symbolic(), X);
    CHECK(gro.max_residual <= 1e-12);
    CHECK(gro.consistent);

    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 2);
    const CriterionReport broken = check_infinitesimal_criterion(dyn({"x1^2", "0"}), rotation(), one);
    CHECK(broken.max_abs_residual == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK(broken.max_residual == doctest::Approx(std::sqrt(5.0) / 2.0).epsilon(1e-15));
    CHECK_FALSE(broken.consistent);

    CHECK_THROWS_AS(check_infinitesimal_criterion(oscillator(), rotation(), Eigen::MatrixXd(0, 2)),
                    std::invalid_argument);
}

TEST_CASE("loss_igie: counterexample value and empty generator list")
{
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 2);
    const std::vector<Generator> gens{rotation()};
    const LossValue v = loss_igie(dyn({"x1^2", "0"}), gens, one);
    CHECK(std::abs(v.value - 5.0) <= 1e-9);
    CHECK(v.evaluated == 1);

    std::mt19937_64 rng(1);
    const Eigen::MatrixXd X = annulus_batch(rng, 10);
    CHECK(loss_igie(oscillator(), {}, X).value == 0.0);
    CHECK(loss_igfe(oscillator(), {}, X, 0.2).value == 0.0);
    CHECK(loss_fgie(oscillator(), {}, X, 0.1).value == 0.0);
    CHECK(loss_fgfe(oscillator(), {}, X, 0.2, 0.1).value == 0.0);
}

TEST_CASE("losses vanish for exact symmetries")
{
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd osc = annulus_batch(rng, 50);
    const std::vector<Generator> rot{rotation()};
    CHECK(loss_igie(oscillator(), rot, osc).value <= 1e-16);
    CHECK(loss_igfe(oscillator(), rot, osc, 0.2).value <= 1e-8);
    CHECK(loss_fgfe(oscillator(), rot, osc, 0.2, 0.1).value <= 1e-8);
    CHECK(loss_fgie(oscillator(), rot, osc, 0.1).value <= 1e-10);

    const Eigen::MatrixXd box = box_batch(rng, 100, 0.2, 1.0);
    const std::vector<Generator> scale{scaling_symbolic()};
    const std::vector<Generator> scale_lin{scaling_linear()};
    CHECK(loss_fgie(growth(), scale_lin, box, 0.3).value <= 1e-10);
    CHECK(loss_fgie(growth(), scale, box, 0.3).value <= 1e-10);
    CHECK(loss_fgie(oscillator(), rot, osc, 0.0).value == 0.0);
}

TEST_CASE("losses detect a wrong or broken symmetry")
{
    std::mt19937_64 rng(12);
    const Eigen::MatrixXd box = box_batch(rng, 100, 0.2, 1.0);
    const std::vector<Generator> rot{rotation()};
    // The IGFE residual of a wrong generator scales like tau, so the loss like tau^2;
    // a unit horizon exposes the O(1) relative defect.
    CHECK(loss_igfe(growth(), rot, box, 1.0, 256).value > 1e-2);

    const Eigen::MatrixXd osc = annulus_batch(rng, 100);
    const ExprDynamics perturbed = dyn({"-0.1*x1 - x2 + 0.5*x1^2", "x1 - 0.1*x2"});
    CHECK(loss_fgie(perturbed, rot, osc, 0.1).value > 1e-3);
}

TEST_CASE("FGFE preconditions and degenerate batches")
{
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd X = annulus_batch(rng, 10);
    const std::vector<Generator> rot{rotation()};
    CHECK_THROWS_AS(loss_fgfe(oscillator(), rot, X, 0.2, 0.0), std::invalid_argument);
    // With h = 0 the flow is the identity: the FGFE numerator vanishes but its
    // denominator |g.x - x|^2 does not, so the loss is an honest 0.
    const LossValue z = loss_fgfe(ZeroField{}, rot, X, 0.2, 0.1);
    CHECK(z.value == 0.0);
    CHECK(z.evaluated == 10);
    // The infinitesimal-equation denominators J_v h and J_g h do vanish.
    CHECK_THROWS_AS(loss_igie(ZeroField{}, rot, X), DegenerateLossError);
    CHECK_THROWS_AS(loss_fgie(ZeroField{}, rot, X, 0.1), DegenerateLossError);
    CHECK_THROWS_AS(loss_igfe(oscillator(), rot, X, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(loss_igie(oscillator(), rot, Eigen::MatrixXd(0, 2)), std::invalid_argument);
}

TEST_CASE("degenerate points are skipped and counted")
{
    // J_v h = (0, -x1^2) vanishes wherever x1 = 0.
    Eigen::MatrixXd X(3, 2);
    X << 0, 0, 1, 0, 0, 1;
    const std::vector<Generator> rot{rotation()};
    const LossValue v = loss_igie(dyn({"x1^2", "0"}), rot, X);
    CHECK(v.skipped == 2);
    CHECK(v.evaluated == 1);
}

TEST_CASE("structure: infinitesimal-equation losses never integrate h")
{
    std::mt19937_64 rng(14);
    const Eigen::MatrixXd X = annulus_batch(rng, 7);
    const ExprDynamics base = oscillator();
    const std::vector<Generator> gens{rotation(), scaling_linear()};

    CountingDynamics c1(base);
    loss_igie(c1, gens, X);
    CHECK(c1.rhs_calls == 7);

    CountingDynamics c2(base);
    loss_fgie(c2, gens, X, 0.1);
    CHECK(c2.rhs_calls == 7 * (1 + 2));

    CountingDynamics c3(base);
    loss_igfe(c3, gens, X, 0.2, 16);
    CHECK(c3.rhs_calls == 7 * 2 * 16 * 4);
}

TEST_CASE("loss settings dispatch and names")
{
    CHECK(to_string(LossKind::FGIE) == "fgie");
    CHECK(parse_loss_kind("igfe") == LossKind::IGFE);
    CHECK_FALSE(parse_loss_kind("bogus").has_value());

    std::mt19937_64 rng(15);
    const Eigen::MatrixXd X = annulus_batch(rng, 5);
    const std::vector<Generator> rot{rotation()};
    const ExprDynamics perturbed = dyn({"-0.1*x1 - x2 + 0.5*x1^2", "x1 - 0.1*x2"});
    LossSettings s;
    s.kind = LossKind::IGIE;
    CHECK(symmetry_loss(perturbed, rot, X, s).value == loss_igie(perturbed, rot, X).value);
    s.kind = LossKind::FGIE;
    s.epsilon = 0.2;
    CHECK(symmetry_loss(perturbed, rot, X, s).value == loss_fgie(perturbed, rot, X, 0.2).value);
}

TEST_CASE("dynamics oracle: flow identity and initial velocity")
{
    const ExprDynamics h = growth();
    const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.4, 0.7).finished();
    CHECK(h.flow(x, 0.0) == x);
    const double t = 1e-5;
    const Eigen::VectorXd fd = (h.flow(x, t, 1) - h.flow(x, -t, 1)) / (2 * t);
    CHECK((fd - h.rhs(x)).norm() <= 1e-8);

    const Eigen::VectorXd u = (Eigen::VectorXd(2) << 1.0, -0.5).finished();
    const auto fj = h.flow_jvp(x, u, 0.5);
    const double e = 1e-6;
    const Eigen::VectorXd fdj = (h.flow(x + e * u, 0.5) - h.flow(x - e * u, 0.5)) / (2 * e);
    CHECK((fj.tangent - fdj).norm() <= 1e-8);
}

TEST_CASE("model: losses at the true coefficients")
{
    std::mt19937_64 rng(16);
    const SindyModel m(build_library(2, 2), oscillator_truth());
    const Eigen::MatrixXd X = annulus_batch(rng, 40);
    const std::vector<Generator> rot{rotation()};
    CHECK(loss_igie(m, rot, X).value <= 1e-10);
    CHECK(loss_fgie(m, rot, X, 0.1).value <= 1e-10);
    CHECK(loss_igfe(m, rot, X, 0.2).value <= 1e-6);
    CHECK(loss_fgfe(m, rot, X, 0.2, 0.1).value <= 1e-6);
}

TEST_CASE("model: parameter derivatives match finite differences")
{
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 0.3);
    SindyModel m(build_library(2, 2), Eigen::MatrixXd::Zero(2, 6));
    Eigen::VectorXd theta(12);
    for (int i = 0; i < 12; ++i) {
        theta[i] = n(rng);
    }
    m.set_params(theta);
    const Eigen::VectorXd x = testing::random_point(rng, 2), u = testing::random_point(rng, 2);
    const Eigen::MatrixXd Hp = m.rhs_param_jacobian(x);
    const Eigen::MatrixXd Jp = m.jvp_param_jacobian(x, u);
    const Eigen::MatrixXd Js = m.jvp_state_jacobian(x, u);
    const double e = 1e-6;
    for (int k = 0; k < 12; ++k) {
        SindyModel a = m, b = m;
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += e;
        tm[k] -= e;
        a.set_params(tp);
        b.set_params(tm);
        CHECK(((a.rhs(x) - b.rhs(x)) / (2 * e) - Hp.col(k)).norm() <= 1e-8);
        CHECK(((a.jacobian(x) * u - b.jacobian(x) * u) / (2 * e) - Jp.col(k)).norm() <= 1e-8);
    }
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += e;
        xm[j] -= e;
        CHECK(((m.jacobian(xp) * u - m.jacobian(xm) * u) / (2 * e) - Js.col(j)).norm() <= 1e-7);
    }
}

TEST_CASE("loss gradients match central differences at random coefficients")
{
    std::mt19937_64 rng(18);
    std::normal_distribution<double> n(0.0, 0.4);
    const std::vector<Generator> rot{rotation()};
    const Eigen::MatrixXd X = annulus_batch(rng, 12);
    const double step = 1e-6;
    for (LossKind kind : {LossKind::IGIE, LossKind::FGIE, LossKind::IGFE, LossKind::FGFE}) {
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::MatrixXd W = oscillator_truth();
            for (Eigen::Index i = 0; i < W.size(); ++i) {
                W.data()[i] += n(rng);
            }
            SindyModel m(build_library(2, 2), W);
            LossSettings s;
            s.kind = kind;
            s.tau = 0.2;
            s.epsilon = 0.1;
            s.substeps = 16;
            const LossValue lv = symmetry_loss_grad(m, rot, X, s);
            REQUIRE(lv.gradient.size() == 12);
            CHECK(lv.value == doctest::Approx(symmetry_loss(m, rot, X, s).value).epsilon(1e-12));
            Eigen::VectorXd fd(12);
            const Eigen::VectorXd theta = m.params();
            for (int k = 0; k < 12; ++k) {
                SindyModel a = m, b = m;
                Eigen::VectorXd tp = theta, tm = theta;
                tp[k] += step;
                tm[k] -= step;
                a.set_params(tp);
                b.set_params(tm);
                fd[k] = (symmetry_loss(a, rot, X, s).value - symmetry_loss(b, rot, X, s).value) / (2 * step);
            }
            INFO("loss ", to_string(kind), " trial ", trial);
            CHECK((lv.gradient - fd).norm() <= 1e-5 * fd.norm());
        }
    }
}
