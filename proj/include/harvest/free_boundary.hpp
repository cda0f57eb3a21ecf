#pragma once

#include <utility>
#include <vector>

#include "harvest/scale_speed.hpp"

namespace harvest {

struct SolverConfig {
    double beta_tol = 1e-10;      // root tolerance in beta
    double residual_tol = 1e-8;   // acceptance tolerance on the solved system
    double bracket_cap = 1024.0;  // right bracket capped at bracket_cap * xi
    int trace_points = 48;        // g-scan resolution for the uniqueness check
    QuadratureConfig quad;
};

struct ThresholdSolution {
    double beta_star = 0.0;
    double lambda_star = 0.0;
    double residual_theta = 0.0;     // |Theta(beta*, lambda*)|
    double residual_boundary = 0.0;  // |K b(beta*) + h(beta*) - lambda*|
    double speed_mass = 0.0;         // m_{beta*}(]0, beta*[)
    std::vector<std::pair<double, double>> bracket_history;  // (beta, g(beta))
    CriticalPoints cp{};
};

// Theta(beta, lambda) = int_0^beta [K b + h - lambda] m_beta(ds).
// Throws std::runtime_error when the speed integral does not converge.
double theta(const ModelSpec& model, double beta, double lambda,
             const QuadratureConfig& quad = {});

// Speed-measure average of K b + h over (0, beta); the unique lambda with
// Theta(beta, lambda) = 0. Throws when the speed mass is not finite positive.
double big_lambda(const ModelSpec& model, double beta, const QuadratureConfig& quad = {});

// Residual of (1/2) sigma^2 d_beta Theta + b Theta - [K b + h - lambda] with the
// beta-derivative taken by central difference; test hook.
double theta_ode_residual(const ModelSpec& model, double beta, double lambda,
                          const QuadratureConfig& quad = {});

// Root of g(beta) = beta - rho_upper(Lambda(beta)) on (xi, inf).
// Throws std::runtime_error on bracket exhaustion or multiple g-roots in the trace.
ThresholdSolution solve_threshold(const ModelSpec& model, const CriticalPoints& cp,
                                  const SolverConfig& cfg = {});

// A few damped Newton steps on the raw 2-D system (Theta, K b + h - lambda);
// cross-check only, never the primary solve path.
std::pair<double, double> newton_cross_check(const ModelSpec& model, double beta0,
                                             double lambda0,
                                             const QuadratureConfig& quad = {},
                                             int steps = 12);

// Evaluable gradient of the HJB solution: w' on (0, beta*], the constant K
// above, and w'' through the ODE rearrangement.
class ValueGradient {
  public:
    ValueGradient(const ModelSpec& model, const ThresholdSolution& sol,
                  QuadratureConfig quad = {});

    // Throws std::domain_error for x <= 0.
    double wprime(double x) const;
    double wsecond(double x) const;

    double pasting_point() const { return sol_.beta_star; }
    const ThresholdSolution& solution() const { return sol_; }

    // sup |w'| estimate over a log grid (the C1 bound).
    double gradient_bound() const;

  private:
    const ModelSpec* model_;
    ThresholdSolution sol_;
    ScaleSpeed ss_;
};

struct HjbCheck {
    std::string name;
    bool pass = false;
    bool applicable = true;
    double value = 0.0;      // max violation / residual witnessed
    double tolerance = 0.0;
};

struct HjbGridConfig {
    int points = 60;            // log-spaced grid on (0, beta*)
    double lo_factor = 1e-6;    // grid start as a fraction of beta*
    double drift_horizon = 10.0;  // drift branch checked on (beta*, horizon * beta*]
    double ode_tol = 1e-6;
    double gradient_tol = 1e-10;
    double drift_tol = 1e-10;
    double pasting_wp_tol = 1e-10;
    double pasting_ws_tol = 1e-6;
    double zero_limit_tol = 1e-6;
};

struct HjbReport {
    std::vector<HjbCheck> checks;
    std::vector<double> grid;
    double gradient_bound = 0.0;

    bool all_pass() const;
    const HjbCheck* find(const std::string& name) const;
};

HjbReport verify_hjb(const ModelSpec& model, const ThresholdSolution& sol,
                     const ValueGradient& vg, const HjbGridConfig& grid = {});

}  // namespace harvest
