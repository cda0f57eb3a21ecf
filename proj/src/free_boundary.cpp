#include "harvest/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

namespace harvest {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double theta(const ModelSpec& model, double beta, double lambda,
             const QuadratureConfig& quad) {
    if (!(beta > 0.0)) throw std::domain_error("theta: beta must be > 0");
    ScaleSpeed ss(model, beta, quad);
    const auto r = ss.speed_integral(
        [&](double s) { return model.level(s) - lambda; }, 0.0, beta);
    if (!r.converged)
        throw std::runtime_error(
            "theta: speed integral over (0,beta) did not converge (tail rate " +
            std::to_string(r.lower_tail_rate) + ")");
    return r.value;
}

double big_lambda(const ModelSpec& model, double beta, const QuadratureConfig& quad) {
    ScaleSpeed ss(model, beta, quad);
    const auto mass = ss.speed_integral([](double) { return 1.0; }, 0.0, beta);
    if (!mass.converged || !(mass.value > 0.0) || !std::isfinite(mass.value))
        throw std::runtime_error(
            "big_lambda: speed mass m_beta(]0,beta[) is not finite positive; "
            "the near-zero integrability assumption fails for this model");
    const auto avg =
        ss.speed_integral([&](double s) { return model.level(s); }, 0.0, beta);
    if (!avg.converged)
        throw std::runtime_error("big_lambda: level integral did not converge");
    return avg.value / mass.value;
}

double theta_ode_residual(const ModelSpec& model, double beta, double lambda,
                          const QuadratureConfig& quad) {
    const double dz = 1e-5 * beta;
    const double dth = (theta(model, beta + dz, lambda, quad) -
                        theta(model, beta - dz, lambda, quad)) /
                       (2.0 * dz);
    const double sig = model.vol(beta);
    return 0.5 * sig * sig * dth + model.drift(beta) * theta(model, beta, lambda, quad) -
           (model.level(beta) - lambda);
}

ThresholdSolution solve_threshold(const ModelSpec& model, const CriticalPoints& cp,
                                  const SolverConfig& cfg) {
    ThresholdSolution sol;
    sol.cp = cp;

    auto g = [&](double beta) {
        const double lam = big_lambda(model, beta, cfg.quad);
        if (!(lam > cp.lambda_under && lam < cp.lambda_bar)) {
            std::ostringstream os;
            os << "solve_threshold: Lambda(" << beta << ") = " << lam
               << " left the admissible range (" << cp.lambda_under << ", "
               << cp.lambda_bar << ")";
            throw std::runtime_error(os.str());
        }
        return beta - rho_upper(model, cp, lam);
    };

    // left end: g < 0 just above xi; right bracket starts at rho(Lambda) and
    // doubles the distance from xi until the sign flips
    double lo = cp.xi * (1.0 + 1e-7);
    double glo = g(lo);
    sol.bracket_history.emplace_back(lo, glo);
    if (glo >= 0.0) {
        // already past the crossing at machine distance from xi
        lo = cp.xi;
        glo = -1.0;
    }

    double hi = lo - glo;  // = rho_upper(Lambda(lo))
    double ghi = g(hi);
    sol.bracket_history.emplace_back(hi, ghi);
    while (ghi < 0.0) {
        const double next = cp.xi + 2.0 * (hi - cp.xi);
        if (next > cfg.bracket_cap * cp.xi) {
            std::ostringstream os;
            os << "solve_threshold: no fixed point found, bracket exhausted at "
               << hi << "; g-trace:";
            for (auto& [b, gv] : sol.bracket_history) os << " (" << b << "," << gv << ")";
            throw std::runtime_error(os.str());
        }
        lo = hi;
        glo = ghi;
        hi = next;
        ghi = g(hi);
        sol.bracket_history.emplace_back(hi, ghi);
    }

    auto stop = [&](double a, double b) {
        return std::abs(b - a) <= cfg.beta_tol * std::max(1.0, std::abs(b));
    };
    std::uintmax_t it = 200;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, stop, it);
    sol.beta_star = 0.5 * (r.first + r.second);
    sol.lambda_star = big_lambda(model, sol.beta_star, cfg.quad);

    // uniqueness scan: Proposition-level theory proves one crossing; more than
    // one sign change in the trace signals an assumption violation upstream
    {
        std::vector<std::pair<double, double>> trace = sol.bracket_history;
        const double la = std::log(cp.xi * (1.0 + 1e-6)), lb = std::log(hi);
        for (int i = 0; i <= cfg.trace_points; ++i) {
            const double b = std::exp(la + (lb - la) * i / double(cfg.trace_points));
            trace.emplace_back(b, g(b));
        }
        std::sort(trace.begin(), trace.end());
        int crossings = 0;
        std::vector<double> candidates;
        for (std::size_t i = 1; i < trace.size(); ++i) {
            if (trace[i - 1].second < 0.0 && trace[i].second >= 0.0) {
                ++crossings;
                candidates.push_back(0.5 * (trace[i - 1].first + trace[i].first));
            }
        }
        sol.bracket_history = std::move(trace);
        if (crossings > 1) {
            std::ostringstream os;
            os << "solve_threshold: multiple fixed-point candidates detected:";
            for (double c : candidates) os << " " << c;
            os << "; uniqueness failure signals an assumption violation";
            throw std::runtime_error(os.str());
        }
    }

    sol.residual_theta = std::abs(theta(model, sol.beta_star, sol.lambda_star, cfg.quad));
    sol.residual_boundary = std::abs(model.level(sol.beta_star) - sol.lambda_star);
    {
        ScaleSpeed ss(model, sol.beta_star, cfg.quad);
        sol.speed_mass =
            ss.speed_integral([](double) { return 1.0; }, 0.0, sol.beta_star).value;
    }

    if (sol.residual_theta > cfg.residual_tol * std::max(1.0, std::abs(sol.lambda_star)) ||
        sol.residual_boundary > cfg.residual_tol * std::max(1.0, std::abs(sol.lambda_star)))
        throw std::runtime_error("solve_threshold: residuals exceed tolerance");
    if (!(sol.beta_star > cp.xi))
        throw std::runtime_error("solve_threshold: beta* <= xi, solution rejected");
    if (!(sol.lambda_star > cp.level_at_zero && sol.lambda_star < cp.lambda_bar))
        throw std::runtime_error(
            "solve_threshold: lambda* outside (K b(0)+h(0), lambda_bar)");
    return sol;
}

std::pair<double, double> newton_cross_check(const ModelSpec& model, double beta0,
                                             double lambda0, const QuadratureConfig& quad,
                                             int steps) {
    double b = beta0, l = lambda0;
    for (int i = 0; i < steps; ++i) {
        const double f1 = theta(model, b, l, quad);
        const double f2 = model.level(b) - l;
        const double db = 1e-6 * b;
        // Theta is affine in lambda with slope -m_beta(]0,beta[)
        ScaleSpeed ss(model, b, quad);
        const double mass = ss.speed_integral([](double) { return 1.0; }, 0.0, b).value;
        const double j11 = (theta(model, b + db, l, quad) - theta(model, b - db, l, quad)) /
                           (2.0 * db);
        const double j12 = -mass;
        const double j21 = model.level_deriv(b);
        const double j22 = -1.0;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300) break;
        const double step_b = (f1 * j22 - f2 * j12) / det;
        const double step_l = (j11 * f2 - j21 * f1) / det;
        const double damp = std::min(1.0, 0.25 * b / std::max(std::abs(step_b), 1e-300));
        b -= damp * step_b;
        l -= damp * step_l;
        if (std::abs(step_b) < 1e-12 * b && std::abs(step_l) < 1e-12 * std::max(1.0, std::abs(l)))
            break;
    }
    return {b, l};
}

ValueGradient::ValueGradient(const ModelSpec& model, const ThresholdSolution& sol,
                             QuadratureConfig quad)
    : model_(&model), sol_(sol), ss_(model, sol.beta_star, quad) {}

double ValueGradient::wprime(double x) const {
    if (!(x > 0.0)) throw std::domain_error("wprime: x must be > 0");
    if (x >= sol_.beta_star) return model_->price;
    const double lp = ss_.log_scale_exponent(x);

    // Near 0 the integral over (x, beta*) tends to -Theta(beta*, lambda*) = 0,
    // so its quadrature noise gets amplified by p'(x); once p' is large, switch
    // to the complementary integral over (0, x), sign-stable there, with the
    // p'(x) factor folded into the integrand exponent (p' alone can overflow
    // while the measure of (0, x) underflows; their product is moderate).
    if (lp > 2.0) {
        const auto scaled = ss_.speed_integral_scaled(
            [&](double s) { return sol_.lambda_star - model_->level(s); }, 0.0, x, lp);
        if (!scaled.converged)
            throw std::runtime_error("wprime: speed integral did not converge");
        return model_->price + scaled.value;
    }
    const auto integral = ss_.speed_integral(
        [&](double s) { return model_->level(s) - sol_.lambda_star; }, x,
        sol_.beta_star);
    if (!integral.converged)
        throw std::runtime_error("wprime: speed integral did not converge");
    if (integral.value == 0.0) return model_->price;
    // product in log space: p' can overflow long before the product does
    const double le = lp + std::log(std::abs(integral.value));
    const double mag = le > 700.0 ? kInf : std::exp(le);
    return model_->price + (integral.value > 0.0 ? mag : -mag);
}

double ValueGradient::wsecond(double x) const {
    if (!(x > 0.0)) throw std::domain_error("wsecond: x must be > 0");
    if (x > sol_.beta_star) return 0.0;
    const double sig = model_->vol(x);
    return 2.0 *
           (sol_.lambda_star - model_->payoff(x) - model_->drift(x) * wprime(x)) /
           (sig * sig);
}

double ValueGradient::gradient_bound() const {
    const double la = std::log(sol_.beta_star * 1e-8), lb = std::log(sol_.beta_star);
    double c1 = model_->price;
    for (int i = 0; i <= 64; ++i)
        c1 = std::max(c1, std::abs(wprime(std::exp(la + (lb - la) * i / 64.0))));
    return c1;
}

bool HjbReport::all_pass() const {
    for (const auto& c : checks)
        if (c.applicable && !c.pass) return false;
    return true;
}

const HjbCheck* HjbReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

HjbReport verify_hjb(const ModelSpec& model, const ThresholdSolution& sol,
                     const ValueGradient& vg, const HjbGridConfig& gc) {
    HjbReport rep;
    const double bs = sol.beta_star;

    rep.grid.resize(gc.points);
    const double la = std::log(bs * gc.lo_factor), lb = std::log(bs * (1.0 - 1e-9));
    for (int i = 0; i < gc.points; ++i)
        rep.grid[i] = std::exp(la + (lb - la) * i / double(gc.points - 1));

    // (i) ODE branch on (0, beta*): w'' recomputed by central difference of w'
    // so the residual genuinely tests the integral construction
    double ode_max = 0.0;
    double min_gap = kInf;  // min of w' - K on the grid
    for (double x : rep.grid) {
        // step must shrink with x: near 0 the gradient varies on the scale of x
        const double d = std::min({1e-5 * bs, 0.45 * (bs - x), 5e-4 * x});
        const double w2 = (vg.wprime(x + d) - vg.wprime(x - d)) / (2.0 * d);
        const double sig = model.vol(x);
        const double res = 0.5 * sig * sig * w2 + model.drift(x) * vg.wprime(x) +
                           model.payoff(x) - sol.lambda_star;
        ode_max = std::max(ode_max, std::abs(res));
        min_gap = std::min(min_gap, vg.wprime(x) - model.price);
    }
    rep.checks.push_back({"ode_branch", ode_max <= gc.ode_tol, true, ode_max, gc.ode_tol});
    rep.checks.push_back(
        {"gradient_constraint", min_gap >= -gc.gradient_tol, true, min_gap, gc.gradient_tol});

    // (iii) drift branch above beta*: K b + h - lambda* <= 0
    double drift_max = -kInf;
    for (int i = 1; i <= gc.points; ++i) {
        const double x = bs * std::pow(gc.drift_horizon, i / double(gc.points));
        drift_max = std::max(drift_max, model.level(x) - sol.lambda_star);
    }
    rep.checks.push_back(
        {"drift_branch", drift_max <= gc.drift_tol, true, drift_max, gc.drift_tol});

    // (iv) smooth pasting at beta*
    const double wp_gap = std::abs(vg.wprime(bs) - model.price);
    const double ws_at = std::abs(vg.wsecond(bs * (1.0 - 1e-12)));
    rep.checks.push_back(
        {"pasting_wprime", wp_gap <= gc.pasting_wp_tol, true, wp_gap, gc.pasting_wp_tol});
    rep.checks.push_back(
        {"pasting_wsecond", ws_at <= gc.pasting_ws_tol, true, ws_at, gc.pasting_ws_tol});

    // (v) w'(0+) against (lambda* - h(0)) / b(0); skipped when b(0) = 0
    {
        const double b0 = model.limits.drift_at_zero.value_or(model.drift(1e-300));
        const double h0 = model.limits.payoff_at_zero.value_or(model.payoff(1e-300));
        if (b0 != 0.0) {
            const double expected = (sol.lambda_star - h0) / b0;
            const double probe = vg.wprime(bs * std::pow(2.0, -48));
            const double gap = std::abs(probe - expected);
            rep.checks.push_back(
                {"zero_limit", gap <= gc.zero_limit_tol, true, gap, gc.zero_limit_tol});
        } else {
            rep.checks.push_back({"zero_limit", true, false, 0.0, gc.zero_limit_tol});
        }
    }

    rep.gradient_bound = vg.gradient_bound();
    rep.checks.push_back({"gradient_bounded", std::isfinite(rep.gradient_bound), true,
                          rep.gradient_bound, kInf});
    return rep;
}

}  // namespace harvest
