#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "harvest/scale_speed.hpp"
#include "test_helpers.hpp"

using namespace harvest;
namespace oracle = testing_oracles;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST_CASE("log scale exponent vanishes at the anchor") {
    for (const auto& m : {oracle::logistic_h0(), oracle::log_ou_h0(),
                          oracle::mean_revert_power()}) {
        for (double beta : {0.4, 1.0, 2.5}) {
            ScaleSpeed ss(m, beta);
            CHECK(ss.log_scale_exponent(beta) == 0.0);
            CHECK(ss.scale_derivative(beta) == 1.0);
        }
    }
}

TEST_CASE("logistic closed form at (beta,x) = (1, 0.5)") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    const double expected = 8.0 * std::log(2.0) + 8.0 * (0.5 - 1.0);
    CHECK(ss.log_scale_exponent(0.5) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("generic quadrature against the fixed-grid Simpson oracle") {
    // mean-revert ell=3/4 has no elementary antiderivative shortcuts in the
    // generic path; Simpson value precomputed offline: 3.03300858899106
    auto m = build_catalog_model(CatalogKind::mean_revert, {1.0, 1.0, 0.4, 0.75});
    ModelSpec generic = m;
    generic.closed_log_scale = nullptr;
    ScaleSpeed ss(generic, 1.0);
    CHECK(ss.log_scale_exponent(2.0) ==
          doctest::Approx(3.03300858899106).epsilon(1e-10));
    const double simpson_ref = oracle::simpson_log_scale(generic, 1.0, 2.0, 40000);
    CHECK(ss.log_scale_exponent(2.0) == doctest::Approx(simpson_ref).epsilon(1e-10));
}

TEST_CASE("scale derivative blows up toward 0 for the logistic model") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    double prev = ss.scale_derivative(0.5);
    for (double x : {0.1, 0.01, 1e-4, 1e-8}) {
        const double v = ss.scale_derivative(x);
        CHECK(v > prev);
        prev = v;
    }
    // exponent eventually exceeds the representable range: +inf sentinel
    CHECK(ss.scale_derivative(1e-100) == kInf);
    CHECK(ss.log_scale_exponent(1e-100) > 700.0);
}

TEST_CASE("log-ou point check against the closed form") {
    const auto m = oracle::log_ou_h0();
    ModelSpec generic = m;
    generic.closed_log_scale = nullptr;
    ScaleSpeed closed(m, 0.8), quad(generic, 0.8);
    for (double x : {0.2, 0.5, 1.5, 3.0}) {
        CHECK(quad.log_scale_exponent(x) ==
              doctest::Approx(m.closed_log_scale(0.8, x)).epsilon(1e-10));
        CHECK(closed.scale_derivative(x) ==
              doctest::Approx(std::exp(m.closed_log_scale(0.8, x))).epsilon(1e-12));
    }
}

TEST_CASE("speed integral of the zero integrand") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    const auto r = ss.speed_integral([](double) { return 0.0; }, 0.0, 1.0);
    CHECK(r.value == 0.0);
    CHECK(r.converged);
    CHECK(r.abs_error_estimate < kInf);
}

TEST_CASE("speed integral of b over (x, beta) equals 1 - 1/p'(x)") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    for (double x : {0.25, 0.5, 0.75}) {
        const auto r = ss.speed_integral(m.drift, x, 1.0);
        REQUIRE(r.converged);
        CHECK(r.value ==
              doctest::Approx(1.0 - 1.0 / ss.scale_derivative(x)).epsilon(1e-9));
    }
}

TEST_CASE("speed mass near zero against the Simpson substitution oracle") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    const auto r = ss.speed_integral([](double) { return 1.0; }, 0.0, 1.0);
    REQUIRE(r.converged);
    const double ref = oracle::simpson_speed_closed(
        m, 1.0, [](double) { return 1.0; }, 0.0, 1.0, 120000);
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-9));
    // offline scipy value for the same integral
    CHECK(r.value == doctest::Approx(5.621710779839).epsilon(1e-9));
}

TEST_CASE("drift identity residual across the catalog") {
    const auto logi = oracle::logistic_h0();
    const auto lou = oracle::log_ou_h0();
    const auto mr = oracle::mean_revert_power();

    SUBCASE("near the anchor both sides vanish") {
        ScaleSpeed ss(logi, 1.0);
        const double x = 1.0 - 1e-9;
        CHECK(std::abs(ss.drift_identity_residual(x)) < 1e-10);
        CHECK(std::abs(1.0 - 1.0 / ss.scale_derivative(x)) < 1e-6);
    }
    SUBCASE("interior points") {
        ScaleSpeed s1(logi, 1.0), s2(lou, 1.0), s3(mr, 1.0);
        CHECK(std::abs(s1.drift_identity_residual(0.5)) <= 1e-8);
        CHECK(std::abs(s2.drift_identity_residual(0.25)) <= 1e-8);
        CHECK(std::abs(s3.drift_identity_residual(0.4)) <= 1e-8);
    }
    SUBCASE("log grid property") {
        for (const ModelSpec* m : {&logi, &lou, &mr}) {
            ScaleSpeed ss(*m, 0.9);
            for (int i = 1; i <= 12; ++i) {
                const double x = 0.9 * std::pow(2.0, -0.5 * i);
                const double tol =
                    1e-8 * std::max(1.0, 1.0 / ss.scale_derivative(x));
                CHECK(std::abs(ss.drift_identity_residual(x)) <= tol);
            }
        }
    }
}

TEST_CASE("anchor shift: exponents are additive") {
    for (const auto& m : {oracle::logistic_power(), oracle::log_ou_power(),
                          oracle::mean_revert_power()}) {
        ScaleSpeed a(m, 0.6), b(m, 1.7);
        for (double x : {0.1, 0.6, 1.0, 2.4}) {
            const double lhs = a.log_scale_exponent(x) + b.log_scale_exponent(0.6);
            const double rhs = b.log_scale_exponent(x);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("speed integrals are anchor-covariant") {
    // int f dm_b1 over a fixed interval = p'_b2(b1) * int f dm_b2
    const auto m = oracle::logistic_h0();
    ScaleSpeed a(m, 0.8), b(m, 1.6);
    const auto f = [](double s) { return 1.0 + s; };
    const auto ia = a.speed_integral(f, 0.3, 0.7);
    const auto ib = b.speed_integral(f, 0.3, 0.7);
    REQUIRE(ia.converged);
    REQUIRE(ib.converged);
    CHECK(ia.value == doctest::Approx(b.scale_derivative(0.8) * ib.value).epsilon(1e-10));
}

TEST_CASE("improper integral to infinity with convergence diagnostics") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    const auto r = ss.speed_integral([](double) { return 1.0; }, 0.0, kInf);
    REQUIRE(r.converged);
    CHECK(r.upper_tail_rate < 1.0);
    CHECK(r.lower_tail_rate < 1.0);
    const double ref = oracle::simpson_speed_closed(
        m, 1.0, [](double) { return 1.0; }, 0.0, 8.0);  // the tail above 8 is ~0
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("non-convergent tail is reported, not guessed") {
    // 1/s against the speed measure of a model whose density ~ const near 0
    ModelSpec m = oracle::logistic_h0();
    m.closed_log_scale = [](double, double) { return 0.0; };  // p' == 1
    ScaleSpeed ss(m, 1.0);
    const auto r = ss.speed_integral([](double s) { return 1.0 / s; }, 0.0, 1.0);
    CHECK_FALSE(r.converged);
    CHECK(r.abs_error_estimate == kInf);
}

TEST_CASE("speed integral argument validation") {
    const auto m = oracle::logistic_h0();
    ScaleSpeed ss(m, 1.0);
    CHECK_THROWS_AS(ss.speed_integral([](double) { return 1.0; }, 1.0, 0.5),
                    std::domain_error);
    CHECK_THROWS_AS(ss.drift_identity_residual(2.0), std::domain_error);
    CHECK_THROWS_AS(ScaleSpeed(m, -1.0), std::domain_error);
    CHECK_THROWS_AS(ss.log_scale_exponent(0.0), std::domain_error);
}
