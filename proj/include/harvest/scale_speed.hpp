#pragma once

#include <limits>

#include "harvest/model.hpp"

namespace harvest {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_panels = 400;     // geometric endpoint panels per improper end
    int gk_max_depth = 12;    // adaptive Gauss-Kronrod subdivision depth per panel
    int tail_quiet_panels = 5;  // consecutive sub-tolerance panels before convergence
};

struct ImproperIntegral {
    double value = 0.0;
    double abs_error_estimate = std::numeric_limits<double>::infinity();
    bool converged = false;
    // Geometric decay ratio of the last endpoint panels (NaN when not improper).
    double lower_tail_rate = std::numeric_limits<double>::quiet_NaN();
    double upper_tail_rate = std::numeric_limits<double>::quiet_NaN();
};

// Evaluates p'_beta, the speed density and integrals against m_beta for one
// anchored diffusion. Instances are immutable and shareable across threads.
class ScaleSpeed {
  public:
    ScaleSpeed(const ModelSpec& model, double beta, QuadratureConfig cfg = {});

    double beta() const { return beta_; }
    const ModelSpec& model() const { return *model_; }

    // log p'_beta(x) = -int_beta^x 2 b / sigma^2; closed form takes priority.
    // Throws std::runtime_error on quadrature non-convergence.
    double log_scale_exponent(double x) const;

    // exp of the above; +inf / 0 sentinels outside the representable range.
    double scale_derivative(double x) const;

    // 2 / (sigma^2(x) p'_beta(x))
    double speed_density(double x) const;

    // int_lower^upper f(s) m_beta(ds); upper may be +inf, lower may be 0.
    ImproperIntegral speed_integral(const RealFn& integrand, double lower,
                                    double upper) const;

    // exp(log_shift) * int f dm, with the shift folded into the integrand's
    // exponent so p'-overflow and measure-underflow cancel instead of meeting.
    ImproperIntegral speed_integral_scaled(const RealFn& integrand, double lower,
                                           double upper, double log_shift) const;

    // int_x^beta b dm  -  (1 - 1/p'_beta(x)); test hook, requires 0 < x < beta.
    double drift_identity_residual(double x) const;

  private:
    const ModelSpec* model_;
    double beta_;
    QuadratureConfig cfg_;

    double speed_integrand_u(const RealFn& f, double u, double log_shift) const;
    double panel(const RealFn& f, double ua, double ub, double log_shift,
                 double* err) const;
};

}  // namespace harvest
