#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "symode/expr.hpp"
#include "symode/funclib.hpp"
#include "symode/term.hpp"
#include "test_support.hpp"

using namespace symode;

namespace {

double at(const Expr& e, std::vector<double> x) { return eval(e, std::span<const double>(x)); }

TermKey mono(std::vector<int> p) { return TermKey::monomial(std::move(p)); }

}  // namespace

TEST_CASE("parse: damped oscillator right-hand side")
{
    const Expr e = parse("-0.1*x1 - x2", 2);
    CHECK(at(e, {1.0, 0.0}) == doctest::Approx(-0.1));
    CHECK(at(e, {0.3, -2.0}) == doctest::Approx(-0.03 + 2.0));
    CHECK(e.min_dimension() == 2);
}

TEST_CASE("parse: constant zero")
{
    const Expr e = parse("0", 1);
    CHECK(e.kind() == NodeKind::Constant);
    CHECK(e.value() == 0.0);
}

TEST_CASE("parse: rationals and exp")
{
    const Expr e = parse("2/3 - (4/3)*exp(x2)", 2);
    CHECK(at(e, {0.0, 0.0}) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("parse: precedence and unary minus")
{
    CHECK(at(parse("-x1^2", 1), {3.0}) == -9.0);
    CHECK(at(parse("2*x1^2*x2", 2), {2.0, 3.0}) == 24.0);
    CHECK(at(parse("1 - 2 - 3", 1), {0.0}) == -4.0);
    CHECK(at(parse("8 / 4 / 2", 1), {0.0}) == 1.0);
    CHECK(at(parse("1.5e-1 + .5", 1), {0.0}) == doctest::Approx(0.65));
    CHECK(at(parse("  ( x1 + x1 ) * -x1 ", 1), {2.0}) == -8.0);
}

TEST_CASE("parse: errors carry a position")
{
    try {
        parse("x1 + * x2", 2);
        FAIL("expected ParseError");
    } catch (const ParseError& err) {
        CHECK(err.position() == 5);
    }
    CHECK_THROWS_AS(parse("x3", 2), ParseError);
    CHECK_THROWS_AS(parse("x0", 2), ParseError);
    CHECK_THROWS_AS(parse("(x1", 1), ParseError);
    CHECK_THROWS_AS(parse("x1^-1", 1), ParseError);
    CHECK_THROWS_AS(parse("x1^0.5", 1), ParseError);
    CHECK_THROWS_AS(parse("sin(x1)", 1), ParseError);
    CHECK_THROWS_AS(parse("", 1), ParseError);
}

TEST_CASE("eval: worked values")
{
    CHECK(at(parse("x1*x2^2", 2), {0.75, 2.0}) == 3.0);
    CHECK(at(Expr::constant(5.0), {}) == 5.0);
    CHECK(at(parse("exp(x1)", 1), {0.0}) == 1.0);
}

TEST_CASE("eval: division by zero is flagged, not fatal")
{
    const Expr e = parse("1/x1", 1);
    std::vector<double> zero{0.0};
    CHECK_FALSE(eval_finite(e, zero).has_value());
    CHECK(std::isinf(eval(e, std::span<const double>(zero))));
    CHECK(eval(e, std::span<const double>(zero), DivisionMode::Protected) == 1.0);
    std::vector<double> two{2.0};
    CHECK(eval_finite(e, two).value() == 0.5);
}

TEST_CASE("eval: variable beyond point size throws")
{
    CHECK_THROWS_AS(at(parse("x2", 2), {1.0}), std::out_of_range);
}

TEST_CASE("eval_rows agrees with pointwise eval")
{
    std::mt19937_64 rng(11);
    Eigen::MatrixXd X(20, 3);
    for (int n = 0; n < 20; ++n) {
        X.row(n) = testing::random_point(rng, 3).transpose();
    }
    for (int trial = 0; trial < 50; ++trial) {
        const Expr e = testing::random_expr(rng, 3, 5);
        const Eigen::ArrayXd v = eval_rows(e, X);
        for (int n = 0; n < 20; ++n) {
            Eigen::VectorXd x = X.row(n).transpose();
            const double want = eval(e, x);
            if (std::isfinite(want)) {
                CHECK(std::abs(v[n] - want) <= 1e-13 * std::max(1.0, std::abs(want)));
            } else {
                CHECK_FALSE(std::isfinite(v[n]));
            }
        }
    }
}

TEST_CASE("differentiate: worked examples")
{
    const Expr d1 = differentiate(parse("x1^2*x2", 2), 0);
    CHECK(at(d1, {1.5, -2.0}) == doctest::Approx(2 * 1.5 * -2.0));

    const Expr d2 = differentiate(parse("exp(x2)", 2), 1);
    CHECK(at(d2, {0.0, 0.7}) == doctest::Approx(std::exp(0.7)));

    const Expr d3 = differentiate(parse("0.1*x1 - x1*x2^2", 2), 0);
    for (double b : {-1.0, 0.0, 0.5, 2.0}) {
        CHECK(at(d3, {3.0, b}) == doctest::Approx(0.1 - b * b));
    }
}

TEST_CASE("differentiate matches central differences")
{
    std::mt19937_64 rng(5);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Expr e = testing::random_expr(rng, 2, 5, false);
        const Eigen::VectorXd x = testing::random_point(rng, 2, -1.0, 1.0);
        for (int var = 0; var < 2; ++var) {
            const double analytic = eval(differentiate(e, var), x);
            const double fd = testing::central_difference([&](const Eigen::VectorXd& y) { return eval(e, y); }, x, var);
            if (!std::isfinite(analytic) || std::abs(analytic) > 1e4) {
                continue;
            }
            CHECK(std::abs(analytic - fd) <= 1e-6 * std::max(1.0, std::abs(analytic)));
            ++checked;
        }
    }
    CHECK(checked > 300);
}

TEST_CASE("property: print/parse round trip evaluates bit-identically")
{
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 500; ++trial) {
        const Expr e = testing::random_expr(rng, 3, 6);
        const std::string text = to_string(e);
        const Expr back = parse(text, 3);
        for (int k = 0; k < 5; ++k) {
            const Eigen::VectorXd x = testing::random_point(rng, 3);
            INFO(text);
            CHECK(testing::same_double(eval(back, x), eval(e, x)));
        }
    }
}

TEST_CASE("property: differentiation is linear")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const Expr e1 = testing::random_expr(rng, 2, 4, false);
        const Expr e2 = testing::random_expr(rng, 2, 4, false);
        const double a = std::uniform_real_distribution<double>(-2, 2)(rng);
        const Expr combo = Expr::add(Expr::mul(Expr::constant(a), e1), e2);
        const Expr lhs = differentiate(combo, 0);
        const Expr rhs = Expr::add(Expr::mul(Expr::constant(a), differentiate(e1, 0)), differentiate(e2, 0));
        for (int k = 0; k < 100; ++k) {
            const Eigen::VectorXd x = testing::random_point(rng, 2, -1.0, 1.0);
            const double l = eval(lhs, x);
            const double r = eval(rhs, x);
            if (!std::isfinite(l)) {
                continue;
            }
            CHECK(std::abs(l - r) <= 1e-10 * std::max(1.0, std::abs(r)));
        }
    }
}

TEST_CASE("canonicalize: binomial expansion")
{
    const FunctionLibrary lib = build_library(2, 2);
    const auto form = canonicalize(parse("(x1+x2)^2", 2), lib);
    REQUIRE(form.has_value());
    CHECK(form->coeffs.size() == 3);
    CHECK(form->coeffs.at(mono({2, 0})) == 1.0);
    CHECK(form->coeffs.at(mono({1, 1})) == 2.0);
    CHECK(form->coeffs.at(mono({0, 2})) == 1.0);
}

TEST_CASE("canonicalize: out-of-span and degenerate inputs")
{
    const FunctionLibrary lib = build_library(2, 2);
    CHECK_FALSE(canonicalize(parse("x1^3", 2), lib).has_value());
    CHECK_FALSE(canonicalize(parse("x1/x2", 2), lib).has_value());
    CHECK_FALSE(canonicalize(parse("exp(x1)", 2), lib).has_value());
    CHECK_FALSE(canonicalize(parse("exp(x1*x2)", 2), build_library(2, 2, true)).has_value());

    const auto zero = canonicalize(parse("0*x1", 2), lib);
    REQUIRE(zero.has_value());
    CHECK(zero->coeffs.empty());

    // cancellation of an out-of-library term still lands in span
    const auto cancelled = canonicalize(parse("x1^3 + x2 - x1*x1*x1", 2), lib);
    REQUIRE(cancelled.has_value());
    CHECK(cancelled->coeffs.size() == 1);
}

TEST_CASE("canonicalize: exponential library accepts constant division and shifted exp")
{
    const FunctionLibrary lib = build_library(2, 2, true);
    const auto form = canonicalize(parse("2/3 - (4/3)*exp(x2)", 2), lib);
    REQUIRE(form.has_value());
    CHECK(form->coeffs.at(TermKey::one(2)) == doctest::Approx(2.0 / 3.0));
    CHECK(form->coeffs.at(TermKey::exponential(2, 1)) == doctest::Approx(-4.0 / 3.0));

    const auto shifted = canonicalize(parse("exp(x1 + 1)", 2), lib);
    REQUIRE(shifted.has_value());
    CHECK(shifted->coeffs.at(TermKey::exponential(2, 0)) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("property: canonicalize is idempotent under re-expansion")
{
    std::mt19937_64 rng(77);
    const FunctionLibrary lib = build_library(3, 4);
    int in_span = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Expr e = testing::random_expr(rng, 3, 4, false);
        const auto form = canonicalize(e, lib);
        if (!form) {
            continue;
        }
        ++in_span;
        Polynomial poly(form->coeffs.begin(), form->coeffs.end());
        const auto again = canonicalize(polynomial_expr(poly), lib);
        REQUIRE(again.has_value());
        CHECK(again->coeffs.size() == form->coeffs.size());
        for (const auto& [k, c] : form->coeffs) {
            REQUIRE(again->coeffs.count(k) == 1);
            CHECK(again->coeffs.at(k) == doctest::Approx(c).epsilon(1e-14));
        }
        // and the expansion evaluates like the original
        const Eigen::VectorXd x = testing::random_point(rng, 3, -1.0, 1.0);
        CHECK(eval(polynomial_expr(poly), x) == doctest::Approx(eval(e, x)).epsilon(1e-9));
    }
    CHECK(in_span > 50);
}

TEST_CASE("expression metrics")
{
    const Expr e = parse("x1*x2 + exp(x1)", 2);
    CHECK(e.node_count() == 6);
    CHECK(e.depth() == 3);
    CHECK(to_string(e) == "x1*x2 + exp(x1)");
}
