#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "melpc/common.hpp"
#include "melpc/rng.hpp"
#include "melpc/stats.hpp"
#include "oracles.hpp"

using namespace melpc;
using stats::RegressionResult;


TEST_CASE("ols_regress matches the closed-form normal-equation solve on 1000 instances") {
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_index(40));
        std::vector<double> x(n), y(n);
        const double slope = rng.uniform(-5, 5), intercept = rng.uniform(-10, 10);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.uniform(-20, 20);
            y[i] = intercept + slope * x[i] + rng.uniform(-1, 1);
        }
        RegressionResult res = stats::ols_regress(x, y);
        test_util::NormalEq oracle = test_util::normal_equation_fit(x, y);
        const double rel_s =
            std::fabs(res.slope - oracle.slope) / std::max(1e-30, std::fabs(oracle.slope));
        const double rel_i = std::fabs(res.intercept - oracle.intercept) /
                             std::max(1e-30, std::fabs(oracle.intercept));
        worst = std::max({worst, rel_s, rel_i});
        REQUIRE(res.r_squared >= 0.0);
        REQUIRE(res.r_squared <= 1.0);
        REQUIRE(res.p_value > 0.0);
        REQUIRE(res.p_value <= 1.0);
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("perfectly linear data gives slope 1, intercept 0, r2 1") {
    RegressionResult res = stats::ols_regress({0, 1, 2}, {0, 1, 2});
    CHECK(res.slope == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(res.intercept == doctest::Approx(0.0).scale(1).epsilon(1e-14));
    CHECK(res.r_squared == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(res.p_value > 0.0);  // perfect fit: p underflows but stays positive
    CHECK(res.p_value < 1e-10);
}

TEST_CASE("symmetric tent data gives slope 0 and r2 0") {
    // Hand OLS: x mean 1, y mean 1/3, Sxy = 0 -> slope 0, SSres == SStot.
    RegressionResult res = stats::ols_regress({0, 1, 2}, {0, 1, 0});
    CHECK(res.slope == doctest::Approx(0.0).scale(1).epsilon(1e-14));
    CHECK(res.intercept == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(res.r_squared == doctest::Approx(0.0).scale(1).epsilon(1e-14));
    CHECK(res.p_value == 1.0);
}

TEST_CASE("constant y takes the degenerate r2 = 0 path") {
    RegressionResult res = stats::ols_regress({0, 1, 2, 3}, {4, 4, 4, 4});
    CHECK(res.slope == 0.0);
    CHECK(res.intercept == 4.0);
    CHECK(res.r_squared == 0.0);
    CHECK(res.p_value == 1.0);
}

TEST_CASE("ols_regress rejects constant x and tiny samples") {
    CHECK_THROWS_AS(stats::ols_regress({1, 1, 1}, {0, 1, 2}), DataError);
    CHECK_THROWS_AS(stats::ols_regress({0, 1}, {0, 1}), DataError);
    CHECK_THROWS_AS(stats::ols_regress({0, 1, 2}, {0, 1}), DataError);
}

TEST_CASE("t CDF with 1 dof matches the Cauchy closed form") {
    // CDF(t) = 1/2 + atan(t)/pi.
    for (double t : {-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 10.0}) {
        const double expected = 0.5 + std::atan(t) / std::numbers::pi;
        CHECK(stats::student_t_cdf(t, 1) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(stats::student_t_cdf(1.0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("t CDF matches the quadrature oracle to 1e-9 at dof 1, 5, 8, 30") {
    for (int nu : {1, 5, 8, 30}) {
        for (double t = -6.0; t <= 6.0; t += 0.375) {
            const double oracle = test_util::t_cdf_quadrature(t, nu);
            REQUIRE(std::fabs(stats::student_t_cdf(t, nu) - oracle) < 1e-9);
        }
    }
}

TEST_CASE("dof 8, |t| = 2.306 gives a two-sided p of about 0.050") {
    const double p = 2.0 * (1.0 - stats::student_t_cdf(2.306, 8));
    CHECK(p == doctest::Approx(0.0500003227612842).epsilon(1e-9));
    CHECK(std::fabs(p - 0.050) < 1e-5);
}

TEST_CASE("r2 and p are invariant under affine rescaling of x") {
    Rng rng(202);
    std::vector<double> x(25), y(25);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(0, 10);
        y[i] = 2.0 * x[i] + rng.uniform(-3, 3);
    }
    RegressionResult base = stats::ols_regress(x, y);
    for (double a : {0.25, 40.0}) {
        std::vector<double> xs(x.size());
        for (size_t i = 0; i < x.size(); ++i) xs[i] = a * x[i] - 7.0;
        RegressionResult scaled = stats::ols_regress(xs, y);
        CHECK(scaled.r_squared == doctest::Approx(base.r_squared).epsilon(1e-9));
        CHECK(scaled.p_value == doctest::Approx(base.p_value).epsilon(1e-9));
        CHECK(scaled.slope == doctest::Approx(base.slope / a).epsilon(1e-9));
    }
}

TEST_CASE("incomplete beta satisfies the reflection identity") {
    Rng rng(303);
    for (int i = 0; i < 200; ++i) {
        const double a = rng.uniform(0.3, 8.0), b = rng.uniform(0.3, 8.0);
        const double x = rng.uniform(0.01, 0.99);
        const double lhs = stats::incomplete_beta(a, b, x);
        const double rhs = 1.0 - stats::incomplete_beta(b, a, 1.0 - x);
        REQUIRE(std::fabs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("spearman recovers monotone relationships") {
    std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> inc = {2, 9, 11, 20, 21, 30, 31, 40};
    std::vector<double> dec(inc.rbegin(), inc.rend());
    CHECK(stats::spearman(x, inc).slope == doctest::Approx(1.0));
    CHECK(stats::spearman(x, dec).slope == doctest::Approx(-1.0));
    RegressionResult noisy = stats::spearman(x, {5, 1, 4, 2, 8, 3, 9, 2});
    CHECK(noisy.slope > -1.0);
    CHECK(noisy.slope < 1.0);
}

TEST_CASE("sign test tail probabilities") {
    // P(X >= 8), X ~ Binomial(10, 1/2): (45 + 10 + 1) / 1024.
    CHECK(stats::sign_test_p(8, 10) == doctest::Approx(56.0 / 1024.0).epsilon(1e-12));
    CHECK(stats::sign_test_p(0, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats::sign_test_p(10, 10) == doctest::Approx(1.0 / 1024.0).epsilon(1e-12));
    CHECK_THROWS_AS(stats::sign_test_p(11, 10), DataError);
}
