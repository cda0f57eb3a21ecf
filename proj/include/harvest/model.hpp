#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace harvest {

using RealFn = std::function<double(double)>;

// Analytic endpoint data a model can supply so the numeric probes are skipped.
struct AnalyticLimits {
    std::optional<double> drift_at_zero;
    std::optional<double> vol_at_zero;
    std::optional<double> payoff_at_zero;
    std::optional<double> level_at_infinity;  // lim_{x->inf} K b(x) + h(x), may be -inf
};

// Coefficient bundle defining a controlled-diffusion/payoff problem instance.
// Immutable after construction; all member functions are pure.
struct ModelSpec {
    std::string name;

    RealFn drift;         // b
    RealFn drift_deriv;   // b'
    RealFn vol;           // sigma, > 0 on (0, inf)
    RealFn payoff;        // h, bounded below
    RealFn payoff_deriv;  // h'

    double price = 1.0;            // K > 0, profit per harvested unit
    double growth_exponent = 2.0;  // k in the sigma^2 <= C (1 + x^k) bound

    AnalyticLimits limits;
    bool from_catalog = false;

    // Closed-form log p'_beta(x) when the catalog provides it; empty otherwise.
    std::function<double(double, double)> closed_log_scale;

    double level(double x) const { return price * drift(x) + payoff(x); }
    double level_deriv(double x) const {
        return price * drift_deriv(x) + payoff_deriv(x);
    }
    bool has_closed_scale() const { return static_cast<bool>(closed_log_scale); }
    double closed_scale(double beta, double x) const {
        return std::exp(closed_log_scale(beta, x));
    }
};

enum class CatalogKind { logistic, log_ou, mean_revert };

struct CatalogParams {
    double kappa = 1.0;
    double gamma = 1.0;
    double sigma = 0.5;
    double ell = 1.0;  // diffusion exponent; unused by log_ou
};

// Running payoff: either h = 0 or the concave power h(x) = c x^a, 0 < a < 1,
// which satisfies h'(0+) = inf and h'(inf) = 0.
struct PayoffSpec {
    enum class Kind { zero, power } kind = Kind::zero;
    double a = 0.5;
    double c = 1.0;
};

// Throws std::invalid_argument naming the violated constraint when a parameter
// is outside the family's stated range.
ModelSpec build_catalog_model(CatalogKind kind, const CatalogParams& params,
                              const PayoffSpec& payoff = {}, double price = 1.0);

struct BracketConfig {
    double lo = 1e-8;
    double hi = 1e6;
    int probe_points = 240;  // sign-scan resolution on the log grid
    double root_tol = 1e-13;
};

// The geometry of K b + h: its peak and the admissible lambda range.
struct CriticalPoints {
    double xi;             // unique stationary point of K b + h
    double lambda_bar;     // K b(xi) + h(xi)
    double lambda_under;   // lim_{x->inf} K b + h, may be -inf
    double level_at_zero;  // K b(0) + h(0)
};

// Throws std::runtime_error if K b' + h' has no sign change on the bracket or
// changes sign more than once on the probe grid.
CriticalPoints critical_points(const ModelSpec& model, const BracketConfig& search = {});

// Unique root of K b + h = lambda strictly above xi.
// Requires lambda_under < lambda < lambda_bar; throws std::domain_error otherwise.
double rho_upper(const ModelSpec& model, const CriticalPoints& cp, double lambda);

// Unique root strictly below xi.
// Requires K b(0) + h(0) < lambda < lambda_bar; throws std::domain_error otherwise.
double rho_lower(const ModelSpec& model, const CriticalPoints& cp, double lambda);

struct AssumptionCheck {
    std::string name;
    bool pass = false;
    bool applicable = true;
    double evidence = 0.0;  // witnessing grid point, fitted bound, or integral estimate
    std::string detail;
};

struct ValidationConfig {
    double grid_lo = 1e-6;
    double grid_hi = 1e6;
    int grid_points = 80;
    double speed_tol = 1e-6;  // validator-facing quadrature tolerance
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    std::vector<std::string> warnings;

    bool all_pass() const;
    const AssumptionCheck* find(const std::string& name) const;
};

// Numeric verdicts for the standing assumptions; failures are reported, never thrown.
AssumptionReport validate_assumptions(const ModelSpec& model, const ValidationConfig& cfg = {});

}  // namespace harvest
