#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "harvest/model.hpp"
#include "harvest/scale_speed.hpp"
#include "test_helpers.hpp"

using namespace harvest;
namespace oracle = testing_oracles;

TEST_CASE("catalog logistic ell=1 coefficients and closed scale") {
    const auto m = oracle::logistic_h0();
    CHECK(m.drift(0.3) == doctest::Approx(0.3 * 0.7).epsilon(1e-14));
    CHECK(m.vol(0.3) == doctest::Approx(0.5 * 0.3).epsilon(1e-14));
    CHECK(m.payoff(0.3) == 0.0);
    // p'_beta(x) = (beta/x)^(2 kg/s^2) exp(2 k (x-beta)/s^2), exponents = 8
    const double beta = 1.0, x = 0.5;
    const double expected = std::pow(beta / x, 8.0) * std::exp(8.0 * (x - beta));
    CHECK(m.closed_scale(beta, x) == doctest::Approx(expected).epsilon(1e-13));
    CHECK(m.from_catalog);
    CHECK(m.limits.level_at_infinity.value() == -std::numeric_limits<double>::infinity());
}

TEST_CASE("catalog log-ou closed scale matches the displayed power form") {
    CatalogParams p{1.0, 0.0, 1.0, 1.0};
    const auto m = build_catalog_model(CatalogKind::log_ou, p);
    // kappa/sigma^2 = 1, 2 kappa gamma / sigma^2 = 0:
    // p'(x) = beta^(-ln beta + 1) x^(ln x - 1)
    const double beta = 1.3, x = 0.6;
    const double expected = std::pow(beta, -std::log(beta) + 1.0) *
                            std::pow(x, std::log(x) - 1.0);
    CHECK(m.closed_scale(beta, x) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("catalog mean-revert accepts the CIR-range example parameters") {
    // kappa*gamma - sigma^2/2 = 1 - 0.08 = 0.92 > 0
    const auto m = oracle::mean_revert_power();
    CHECK(m.drift(0.0) == doctest::Approx(1.0));
    CHECK(m.payoff(0.25) == doctest::Approx(0.5));
    CHECK(m.limits.drift_at_zero.value() == doctest::Approx(1.0));
}

TEST_CASE("catalog parameter rejection names the violated constraint") {
    CHECK_THROWS_WITH_AS(
        build_catalog_model(CatalogKind::logistic, {1.0, 1.0, 0.5, 2.0}),
        doctest::Contains("ell in [1, 3/2]"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        build_catalog_model(CatalogKind::mean_revert, {1.0, 1.0, 0.5, 0.3}),
        doctest::Contains("ell in [1/2, 1]"), std::invalid_argument);
    CHECK_THROWS_AS(build_catalog_model(CatalogKind::logistic, {-1.0, 1.0, 0.5, 1.0}),
                    std::invalid_argument);
    PayoffSpec bad{PayoffSpec::Kind::power, 1.5, 1.0};
    CHECK_THROWS_WITH_AS(
        build_catalog_model(CatalogKind::logistic, {1.0, 1.0, 0.5, 1.0}, bad),
        doctest::Contains("0 < a < 1"), std::invalid_argument);
    CHECK_THROWS_AS(
        build_catalog_model(CatalogKind::logistic, {1.0, 1.0, 0.5, 1.0}, {}, 0.0),
        std::invalid_argument);
}

TEST_CASE("closed scale agrees with generic quadrature across the catalog") {
    for (const auto& m : {oracle::logistic_h0(), oracle::log_ou_power(),
                          oracle::mean_revert_power(),
                          build_catalog_model(CatalogKind::logistic, {1.2, 0.8, 0.3, 1.25}),
                          build_catalog_model(CatalogKind::mean_revert, {0.7, 1.1, 0.4, 0.75})}) {
        ModelSpec generic = m;
        generic.closed_log_scale = nullptr;
        for (double beta : {0.5, 1.0, 2.0}) {
            ScaleSpeed ss(generic, beta);
            for (int i = 0; i < 20; ++i) {
                const double x = 0.05 * std::pow(40.0 / 0.05, i / 19.0);
                const double closed = m.closed_log_scale(beta, x);
                CHECK(ss.log_scale_exponent(x) ==
                      doctest::Approx(closed).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("critical points: logistic h=0") {
    const auto m = oracle::logistic_h0();
    const auto cp = critical_points(m);
    CHECK(cp.xi == doctest::Approx(0.5).epsilon(1e-10));          // root of 1-2x
    CHECK(cp.lambda_bar == doctest::Approx(0.25).epsilon(1e-10));  // b(1/2)
    CHECK(cp.level_at_zero == doctest::Approx(0.0));
    CHECK(cp.lambda_under == -std::numeric_limits<double>::infinity());
}

TEST_CASE("critical points: mean-revert with sqrt payoff") {
    const auto m = oracle::mean_revert_power();
    const auto cp = critical_points(m);
    // root of -1 + x^(-1/2)/2 is x = 1/4; lambda_bar = (1 - 1/4) + 1/2
    CHECK(cp.xi == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(cp.lambda_bar == doctest::Approx(1.25).epsilon(1e-10));
    CHECK(cp.level_at_zero == doctest::Approx(1.0));
}

TEST_CASE("critical points sign pattern around xi") {
    for (const auto& m : {oracle::logistic_power(), oracle::log_ou_h0(),
                          oracle::mean_revert_power()}) {
        const auto cp = critical_points(m);
        for (int i = 1; i <= 10; ++i) {
            CHECK(m.level_deriv(cp.xi * (1.0 - 0.09 * i)) > 0.0);
            CHECK(m.level_deriv(cp.xi * (1.0 + 0.5 * i)) < 0.0);
        }
        CHECK(std::abs(m.level_deriv(cp.xi)) < 1e-9);
        CHECK(cp.lambda_bar == m.level(cp.xi));
    }
}

TEST_CASE("critical points failure modes") {
    // monotone decreasing level: no interior peak
    ModelSpec m = oracle::mean_revert_power();
    m.payoff = [](double) { return 0.0; };
    m.payoff_deriv = [](double) { return 0.0; };
    CHECK_THROWS_WITH_AS(critical_points(m), doctest::Contains("no sign change"),
                         std::runtime_error);

    // two peaks: ambiguity must be reported, not silently resolved
    ModelSpec w = oracle::logistic_h0();
    w.drift_deriv = [](double x) { return std::sin(3.0 * x); };
    CHECK_THROWS_WITH_AS(critical_points(w), doctest::Contains("multiple sign changes"),
                         std::runtime_error);
}

TEST_CASE("rho_upper and rho_lower: logistic quadratic roots") {
    const auto m = oracle::logistic_h0();
    const auto cp = critical_points(m);
    // x(1-x) = 0.16 has roots 0.2 and 0.8
    CHECK(rho_upper(m, cp, 0.16) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(rho_lower(m, cp, 0.16) == doctest::Approx(0.2).epsilon(1e-10));
}

TEST_CASE("rho functions: continuity at the peak") {
    for (const auto& m : {oracle::logistic_h0(), oracle::mean_revert_power()}) {
        const auto cp = critical_points(m);
        const double lam = cp.lambda_bar - 1e-9;
        CHECK(rho_upper(m, cp, lam) == doctest::Approx(cp.xi).epsilon(1e-3));
        CHECK(rho_lower(m, cp, lam) == doctest::Approx(cp.xi).epsilon(1e-3));
    }
}

TEST_CASE("rho functions: domain errors") {
    const auto m = oracle::logistic_h0();
    const auto cp = critical_points(m);
    CHECK_THROWS_AS(rho_upper(m, cp, 0.3), std::domain_error);   // above lambda_bar
    CHECK_THROWS_AS(rho_lower(m, cp, -0.1), std::domain_error);  // below Kb(0)+h(0)
}

TEST_CASE("rho residual and side-of-xi properties") {
    for (const auto& m : {oracle::logistic_power(), oracle::log_ou_power(),
                          oracle::mean_revert_power()}) {
        const auto cp = critical_points(m);
        for (int i = 1; i <= 8; ++i) {
            const double lam =
                cp.level_at_zero + (cp.lambda_bar - cp.level_at_zero) * i / 9.0;
            const double up = rho_upper(m, cp, lam);
            const double lo = rho_lower(m, cp, lam);
            CHECK(up > cp.xi);
            CHECK(lo < cp.xi);
            CHECK(lo > 0.0);
            CHECK(std::abs(m.level(up) - lam) <= 1e-10 * std::max(1.0, std::abs(lam)));
            CHECK(std::abs(m.level(lo) - lam) <= 1e-10 * std::max(1.0, std::abs(lam)));
        }
    }
}

TEST_CASE("rho_upper cross-checked against sign-scan bisection") {
    const auto m = oracle::mean_revert_power();
    const auto cp = critical_points(m);
    const double lam = 1.0;
    const double ref = oracle::bisect([&](double x) { return m.level(x) - lam; },
                                      cp.xi, 100.0, 1e-12);
    CHECK(rho_upper(m, cp, lam) == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("rho_lower cross-checked against sign-scan bisection") {
    const auto m = oracle::log_ou_power();
    const auto cp = critical_points(m);
    const double lam = 0.5 * (cp.level_at_zero + cp.lambda_bar);
    const double ref = oracle::bisect([&](double x) { return -(m.level(x) - lam); },
                                      1e-12, cp.xi, 1e-12);
    CHECK(rho_lower(m, cp, lam) == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("validate_assumptions: healthy catalog models pass") {
    for (const auto& m : {oracle::logistic_h0(), oracle::log_ou_h0(),
                          oracle::log_ou_power(), oracle::mean_revert_power()}) {
        const auto rep = validate_assumptions(m);
        for (const auto& c : rep.checks) {
            INFO(m.name, ": ", c.name, " evidence=", c.evidence, " ", c.detail);
            CHECK(c.pass);
        }
        CHECK(rep.all_pass());
    }
}

TEST_CASE("validate_assumptions: logistic with kappa*gamma < sigma^2/2 fails at 0") {
    // scale integral toward 0 converges, so p_beta(0+) stays finite
    const auto m = build_catalog_model(CatalogKind::logistic, {1.0, 0.1, 1.0, 1.0});
    const auto rep = validate_assumptions(m);
    const auto* c = rep.find("scale_divergence_zero");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->pass);
    CHECK(std::isfinite(c->evidence));  // the convergent-integral witness
    CHECK_FALSE(rep.all_pass());
}

TEST_CASE("validate_assumptions: direct quadrature confirms the failed witness") {
    // independent check of the failure: int_0^beta p' converges when the
    // divergence exponent 2 kappa gamma / sigma^2 < 1
    const auto m = build_catalog_model(CatalogKind::logistic, {1.0, 0.1, 1.0, 1.0});
    const double beta = 1.0;
    const double direct = oracle::simpson(
        [&](double u) {
            const double s = std::exp(u);
            return std::exp(m.closed_log_scale(beta, s)) * s;
        },
        std::log(beta) - 60.0, std::log(beta), 60000);
    CHECK(std::isfinite(direct));
    const auto rep = validate_assumptions(m);
    CHECK(rep.find("scale_divergence_zero")->evidence ==
          doctest::Approx(direct).epsilon(1e-3));
}

TEST_CASE("validate_assumptions: user-supplied model gets a Holder warning") {
    ModelSpec m = oracle::logistic_h0();
    m.from_catalog = false;
    const auto rep = validate_assumptions(m);
    CHECK_FALSE(rep.warnings.empty());
    CHECK_FALSE(rep.find("vol_holder_half")->applicable);
}
