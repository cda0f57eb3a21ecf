#include "harvest/scale_speed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace harvest {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogMax = 709.0;   // exp overflow threshold
constexpr double kLogMin = -745.0;  // exp underflow threshold
using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
}  // namespace

ScaleSpeed::ScaleSpeed(const ModelSpec& model, double beta, QuadratureConfig cfg)
    : model_(&model), beta_(beta), cfg_(cfg) {
    if (!(beta > 0.0)) throw std::domain_error("ScaleSpeed: anchor beta must be > 0");
}

double ScaleSpeed::log_scale_exponent(double x) const {
    if (!(x > 0.0)) throw std::domain_error("log_scale_exponent: x must be > 0");
    if (x == beta_) return 0.0;
    if (model_->has_closed_scale()) return model_->closed_log_scale(beta_, x);

    // -int_beta^x 2b/sigma^2 in log abscissae: u = ln s tames the 1/s-type
    // blow-up of the drift-to-variance ratio near 0.
    const double ua = std::log(beta_), ub = std::log(x);
    double err = 0.0;
    const double v = GK::integrate(
        [this](double u) {
            const double s = std::exp(u);
            const double sig = model_->vol(s);
            return 2.0 * model_->drift(s) * s / (sig * sig);
        },
        ua, ub, cfg_.gk_max_depth, 1e-12, &err);
    if (!(err <= std::max(cfg_.abs_tol, cfg_.rel_tol * std::abs(v)) * 100.0))
        throw std::runtime_error(
            "log_scale_exponent: quadrature did not converge (error estimate " +
            std::to_string(err) + ")");
    return -v;
}

double ScaleSpeed::scale_derivative(double x) const {
    const double e = log_scale_exponent(x);
    if (e > kLogMax) return kInf;
    if (e < kLogMin) return 0.0;
    return std::exp(e);
}

double ScaleSpeed::speed_density(double x) const {
    const double sig = model_->vol(x);
    const double e = log_scale_exponent(x);
    const double le = std::log(2.0) - 2.0 * std::log(sig) - e;
    if (le < kLogMin) return 0.0;
    if (le > kLogMax) return kInf;
    return std::exp(le);
}

double ScaleSpeed::speed_integrand_u(const RealFn& f, double u, double log_shift) const {
    const double s = std::exp(u);
    const double fv = f(s);
    if (fv == 0.0) return 0.0;
    const double sig = model_->vol(s);
    const double le =
        std::log(2.0) - 2.0 * std::log(sig) - log_scale_exponent(s) + u + log_shift;
    if (le < kLogMin) return 0.0;
    return fv * std::exp(le);
}

double ScaleSpeed::panel(const RealFn& f, double ua, double ub, double log_shift,
                         double* err) const {
    return GK::integrate([&](double u) { return speed_integrand_u(f, u, log_shift); },
                         ua, ub, cfg_.gk_max_depth, 1e-12, err);
}

ImproperIntegral ScaleSpeed::speed_integral(const RealFn& integrand, double lower,
                                            double upper) const {
    return speed_integral_scaled(integrand, lower, upper, 0.0);
}

ImproperIntegral ScaleSpeed::speed_integral_scaled(const RealFn& integrand, double lower,
                                                   double upper, double log_shift) const {
    if (!(lower >= 0.0) || !(upper > lower))
        throw std::domain_error("speed_integral: need 0 <= lower < upper");

    ImproperIntegral out;
    const bool improper_lo = lower == 0.0;
    const bool improper_hi = !std::isfinite(upper);
    const double w = std::log(2.0);

    // reference abscissa splitting the (possibly improper) ends
    double ref = beta_;
    if (std::isfinite(upper)) ref = std::min(ref, upper);
    if (lower > 0.0) ref = std::max(ref, lower);
    const double u_ref = std::log(ref);

    double total = 0.0, err_total = 0.0;
    bool ok = true;

    // finite core pieces
    if (lower > 0.0 && std::log(lower) < u_ref) {
        double e = 0.0;
        total += panel(integrand, std::log(lower), u_ref, log_shift, &e);
        err_total += e;
    }
    if (std::isfinite(upper) && std::log(upper) > u_ref) {
        double e = 0.0;
        total += panel(integrand, u_ref, std::log(upper), log_shift, &e);
        err_total += e;
    }

    // geometric endpoint panels with tail-sum convergence tests
    auto run_tail = [&](bool toward_zero, double* rate) {
        int quiet = 0;
        double prev_mag = -1.0, last_ratio = 0.0;
        bool converged = false;
        for (int j = 0; j < cfg_.max_panels; ++j) {
            const double ua = toward_zero ? u_ref - (j + 1) * w : u_ref + j * w;
            const double ub = ua + w;
            if (!toward_zero && ub > 700.0) break;  // abscissa overflow guard
            double e = 0.0;
            const double p = panel(integrand, ua, ub, log_shift, &e);
            total += p;
            err_total += e;
            const double mag = std::abs(p);
            if (prev_mag > 0.0) last_ratio = mag / prev_mag;
            const double tol_eff =
                std::max(cfg_.abs_tol, cfg_.rel_tol * std::abs(total)) / 10.0;
            quiet = (mag < tol_eff) ? quiet + 1 : 0;
            if (quiet >= cfg_.tail_quiet_panels) {
                converged = true;
                break;
            }
            prev_mag = mag;
        }
        *rate = last_ratio;
        if (!converged) ok = false;
        err_total += cfg_.tail_quiet_panels * std::max(prev_mag, 0.0) *
                     (converged ? 0.0 : 1.0);
    };

    if (improper_lo) run_tail(true, &out.lower_tail_rate);
    if (improper_hi) run_tail(false, &out.upper_tail_rate);

    out.value = total;
    out.converged = ok;
    out.abs_error_estimate = ok ? err_total : kInf;
    return out;
}

double ScaleSpeed::drift_identity_residual(double x) const {
    if (!(x > 0.0 && x < beta_))
        throw std::domain_error("drift_identity_residual: need 0 < x < beta");
    const auto lhs = speed_integral([this](double s) { return model_->drift(s); }, x, beta_);
    if (!lhs.converged)
        throw std::runtime_error("drift_identity_residual: speed integral non-convergent");
    const double rhs = 1.0 - 1.0 / scale_derivative(x);
    return lhs.value - rhs;
}

}  // namespace harvest
