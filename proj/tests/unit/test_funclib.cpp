#include <doctest.h>

#include <random>
#include <vector>

#include "symode/funclib.hpp"
#include "test_support.hpp"

using namespace symode;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            M(i, j) = n(rng);
        }
    }
    return M;
}

long binomial(int n, int k)
{
    long r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

}  // namespace

TEST_CASE("build_library: planar quadratic library order")
{
    const FunctionLibrary lib = build_library(2, 2);
    CHECK(lib.size() == 6);
    CHECK(lib.term_names() == std::vector<std::string>{"1", "x1", "x2", "x1^2", "x1*x2", "x2^2"});
}

TEST_CASE("build_library: degenerate and exponential variants")
{
    CHECK(build_library(1, 0).term_names() == std::vector<std::string>{"1"});
    const FunctionLibrary lib = build_library(2, 2, true);
    CHECK(lib.size() == 8);
    CHECK(lib.term_names().back() == "exp(x2)");
    CHECK(lib.term_names()[6] == "exp(x1)");
}

TEST_CASE("build_library: term count and determinism")
{
    for (int d = 1; d <= 4; ++d) {
        for (int q = 0; q <= 4; ++q) {
            const FunctionLibrary a = build_library(d, q);
            const FunctionLibrary b = build_library(d, q);
            CHECK(static_cast<long>(a.size()) == binomial(d + q, q));
            CHECK(a.terms() == b.terms());
            for (std::size_t i = 1; i < a.size(); ++i) {
                CHECK(a.term(i - 1) < a.term(i));
                CHECK(a.term(i - 1).total_degree() <= a.term(i).total_degree());
            }
        }
    }
    CHECK(build_library(4, 2).size() == 15);
}

TEST_CASE("eval_library: worked values")
{
    const FunctionLibrary lib = build_library(2, 2);
    Eigen::VectorXd x(2);
    x << 2.0, 3.0;
    Eigen::VectorXd want(6);
    want << 1, 2, 3, 4, 6, 9;
    CHECK(lib.eval(x) == want);

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(6);
    e0[0] = 1.0;
    CHECK(lib.eval(zero) == e0);

    Eigen::VectorXd want_exp(8);
    want_exp << 1, 0, 0, 0, 0, 0, 1, 1;
    CHECK(build_library(2, 2, true).eval(zero) == want_exp);
}

TEST_CASE("eval_rows matches eval")
{
    std::mt19937_64 rng(3);
    const FunctionLibrary lib = build_library(3, 3, true);
    Eigen::MatrixXd X = random_matrix(rng, 10, 3);
    const Eigen::MatrixXd T = lib.eval_rows(X);
    for (int n = 0; n < 10; ++n) {
        CHECK((T.row(n).transpose() - lib.eval(Eigen::VectorXd(X.row(n).transpose()))).norm() <= 1e-14);
    }
}

TEST_CASE("library_jacobian: worked rows")
{
    const FunctionLibrary lib = build_library(2, 2);
    Eigen::VectorXd x(2);
    x << 1.25, -0.5;
    const Eigen::MatrixXd J = lib.jacobian(x);
    CHECK(J.rows() == 6);
    CHECK(J(0, 0) == 0.0);
    CHECK(J(0, 1) == 0.0);
    CHECK(J(4, 0) == -0.5);  // x1*x2
    CHECK(J(4, 1) == 1.25);
    CHECK(J(5, 0) == 0.0);  // x2^2
    CHECK(J(5, 1) == -1.0);
}

TEST_CASE("library_jacobian and hessian_contract match finite differences")
{
    std::mt19937_64 rng(21);
    for (bool with_exp : {false, true}) {
        const FunctionLibrary lib = build_library(3, 3, with_exp);
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::VectorXd x = testing::random_point(rng, 3, -1.0, 1.0);
            const Eigen::VectorXd u = testing::random_point(rng, 3, -1.0, 1.0);
            const Eigen::MatrixXd J = lib.jacobian(x);
            const Eigen::MatrixXd K = lib.hessian_contract(x, u);
            for (std::size_t mu = 0; mu < lib.size(); ++mu) {
                const auto m = static_cast<Eigen::Index>(mu);
                for (int j = 0; j < 3; ++j) {
                    const double fd = testing::central_difference(
                        [&](const Eigen::VectorXd& y) { return lib.eval(y)[m]; }, x, j);
                    CHECK(std::abs(J(m, j) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
                    const double fd2 = testing::central_difference(
                        [&](const Eigen::VectorXd& y) { return (lib.jacobian(y) * u)[m]; }, x, j);
                    CHECK(std::abs(K(m, j) - fd2) <= 1e-6 * std::max(1.0, std::abs(fd2)));
                }
            }
        }
    }
}

TEST_CASE("m_theta: worked example and failure")
{
    const FunctionLibrary lib = build_library(2, 2);
    const std::vector<Expr> f1{parse("x2^2", 2), parse("x2", 2)};
    const auto M = m_theta(lib, f1);
    REQUIRE(M.has_value());
    Eigen::MatrixXd want(2, 6);
    want << 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0;
    CHECK(*M == want);

    const std::vector<Expr> f2{parse("x1^3", 2)};
    CHECK_FALSE(m_theta(lib, f2).has_value());

    const std::vector<Expr> zero{parse("0", 2)};
    CHECK(m_theta(lib, zero)->isZero());
}

TEST_CASE("m_theta of the library itself is the identity")
{
    for (bool with_exp : {false, true}) {
        const FunctionLibrary lib = build_library(3, 2, with_exp);
        std::vector<Expr> comps;
        for (const auto& t : lib.terms()) {
            comps.push_back(term_expr(t));
        }
        const auto M = m_theta(lib, comps);
        REQUIRE(M.has_value());
        CHECK(*M == Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(lib.size()), static_cast<Eigen::Index>(lib.size())));
    }
}

TEST_CASE("generator_structure_matrix: rotation")
{
    const FunctionLibrary lib = build_library(2, 2);
    Eigen::MatrixXd L(2, 2);
    L << 0, 1, -1, 0;
    const Eigen::MatrixXd M = generator_structure_matrix(lib, L);
    // rows: 1 -> 0; x1 -> x2; x2 -> -x1; x1^2 -> 2 x1x2; x1x2 -> x2^2 - x1^2; x2^2 -> -2 x1x2
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(6, 6);
    want(1, 2) = 1;
    want(2, 1) = -1;
    want(3, 4) = 2;
    want(4, 5) = 1;
    want(4, 3) = -1;
    want(5, 4) = -2;
    CHECK((M - want).norm() == 0.0);
}

TEST_CASE("generator_structure_matrix: zero and identity generators")
{
    const FunctionLibrary lib = build_library(2, 2);
    CHECK(generator_structure_matrix(lib, Eigen::MatrixXd::Zero(2, 2)).isZero());
    Eigen::VectorXd degrees(6);
    degrees << 0, 1, 1, 2, 2, 2;
    CHECK(generator_structure_matrix(lib, Eigen::MatrixXd::Identity(2, 2)) == Eigen::MatrixXd(degrees.asDiagonal()));
}

TEST_CASE("generator_structure_matrix: rejects exponential libraries and bad shapes")
{
    CHECK_THROWS_AS(generator_structure_matrix(build_library(2, 2, true), Eigen::MatrixXd::Identity(2, 2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(generator_structure_matrix(build_library(2, 2), Eigen::MatrixXd::Identity(3, 3)),
                    std::invalid_argument);
}

TEST_CASE("property: structure matrix satisfies its defining identity (closure)")
{
    std::mt19937_64 rng(8);
    for (int d = 1; d <= 4; ++d) {
        for (int q = 1; q <= 3; ++q) {
            const FunctionLibrary lib = build_library(d, q);
            const Eigen::MatrixXd L = random_matrix(rng, d, d);
            const Eigen::MatrixXd M = generator_structure_matrix(lib, L);
            for (int k = 0; k < 50; ++k) {
                const Eigen::VectorXd x = testing::random_point(rng, d);
                const Eigen::VectorXd lhs = lib.jacobian(x) * (L * x);
                const Eigen::VectorXd rhs = M * lib.eval(x);
                CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
            }
        }
    }
}

TEST_CASE("property: structure matrix respects the commutator identity")
{
    std::mt19937_64 rng(13);
    const FunctionLibrary lib = build_library(3, 2);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd L1 = random_matrix(rng, 3, 3);
        const Eigen::MatrixXd L2 = random_matrix(rng, 3, 3);
        const Eigen::MatrixXd S =
            generator_structure_matrix(lib, L1 * L2) - generator_structure_matrix(lib, L2 * L1);
        for (int k = 0; k < 20; ++k) {
            const Eigen::VectorXd x = testing::random_point(rng, 3);
            const Eigen::VectorXd lhs = lib.jacobian(x) * ((L1 * L2 - L2 * L1) * x);
            CHECK((lhs - S * lib.eval(x)).norm() <= 1e-9 * std::max(1.0, lhs.norm()));
        }
    }
}
