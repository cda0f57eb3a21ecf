#include "harvest/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "harvest/scale_speed.hpp"

namespace harvest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void reject(const std::string& what) {
    throw std::invalid_argument("catalog model rejected: " + what);
}

void apply_payoff(ModelSpec& m, const PayoffSpec& p) {
    switch (p.kind) {
        case PayoffSpec::Kind::zero:
            m.payoff = [](double) { return 0.0; };
            m.payoff_deriv = [](double) { return 0.0; };
            m.limits.payoff_at_zero = 0.0;
            break;
        case PayoffSpec::Kind::power: {
            if (!(p.a > 0.0 && p.a < 1.0)) reject("power payoff requires 0 < a < 1");
            if (!(p.c > 0.0)) reject("power payoff requires c > 0");
            const double a = p.a, c = p.c;
            m.payoff = [c, a](double x) { return c * std::pow(x, a); };
            m.payoff_deriv = [c, a](double x) { return a * c * std::pow(x, a - 1.0); };
            m.limits.payoff_at_zero = 0.0;
            break;
        }
    }
}

std::string describe(const char* kind, const CatalogParams& p, const PayoffSpec& h,
                     double K) {
    std::ostringstream os;
    os << kind << "(kappa=" << p.kappa << ",gamma=" << p.gamma << ",sigma=" << p.sigma;
    if (std::string(kind) != "log-ou") os << ",ell=" << p.ell;
    os << ")";
    if (h.kind == PayoffSpec::Kind::power)
        os << "+h=" << h.c << "*x^" << h.a;
    else
        os << "+h=0";
    os << ",K=" << K;
    return os.str();
}

// Both polynomial-drift families share the same closed log-scale structure;
// only the exponent pair differs. generic branch handled per family below.
double log_scale_exp_linear(double q, double r, double beta, double x) {
    // p' = (beta/x)^q exp(r (x - beta))
    return q * (std::log(beta) - std::log(x)) + r * (x - beta);
}

}  // namespace

ModelSpec build_catalog_model(CatalogKind kind, const CatalogParams& p,
                              const PayoffSpec& payoff, double price) {
    if (!(price > 0.0)) reject("price K must be strictly positive");
    if (!(p.kappa > 0.0)) reject("rate kappa must be strictly positive");
    if (!(p.sigma > 0.0)) reject("rate sigma must be strictly positive");

    const double kp = p.kappa, gm = p.gamma, vs = p.sigma, ell = p.ell;
    const double vs2 = vs * vs;
    constexpr double eps = 1e-12;

    ModelSpec m;
    m.price = price;
    m.from_catalog = true;
    m.limits.level_at_infinity = -kInf;

    switch (kind) {
        case CatalogKind::logistic: {
            if (!(gm > 0.0)) reject("rate gamma must be strictly positive");
            if (ell < 1.0 - eps || ell > 1.5 + eps)
                reject("logistic family requires ell in [1, 3/2]");
            m.name = describe("logistic", p, payoff, price);
            m.drift = [kp, gm](double x) { return kp * (gm - x) * x; };
            m.drift_deriv = [kp, gm](double x) { return kp * (gm - 2.0 * x); };
            m.vol = [vs, ell](double x) { return vs * std::pow(x, ell); };
            m.growth_exponent = 2.0 * ell;
            m.limits.drift_at_zero = 0.0;
            m.limits.vol_at_zero = 0.0;
            if (std::abs(ell - 1.0) < eps) {
                const double q = 2.0 * kp * gm / vs2, r = 2.0 * kp / vs2;
                m.closed_log_scale = [q, r](double beta, double x) {
                    return log_scale_exp_linear(q, r, beta, x);
                };
            } else if (std::abs(ell - 1.5) < eps) {
                const double q = 2.0 * kp / vs2, r = 2.0 * kp * gm / vs2;
                m.closed_log_scale = [q, r](double beta, double x) {
                    return q * std::log(x / beta) + r * (1.0 / x - 1.0 / beta);
                };
            } else {
                const double c1 = 2.0 * kp * gm / (2.0 * (ell - 1.0) * vs2);
                const double e1 = -2.0 * (ell - 1.0);
                const double c2 = 2.0 * kp / ((3.0 - 2.0 * ell) * vs2);
                const double e2 = 3.0 - 2.0 * ell;
                m.closed_log_scale = [c1, e1, c2, e2](double beta, double x) {
                    return c1 * (std::pow(x, e1) - std::pow(beta, e1)) +
                           c2 * (std::pow(x, e2) - std::pow(beta, e2));
                };
            }
            break;
        }
        case CatalogKind::log_ou: {
            m.name = describe("log-ou", p, payoff, price);
            m.drift = [kp, gm, vs2](double x) {
                return (kp * gm + 0.5 * vs2 - kp * std::log(x)) * x;
            };
            m.drift_deriv = [kp, gm, vs2](double x) {
                return kp * gm + 0.5 * vs2 - kp * std::log(x) - kp;
            };
            m.vol = [vs](double x) { return vs * x; };
            m.growth_exponent = 2.0;
            m.limits.drift_at_zero = 0.0;  // x ln x -> 0
            m.limits.vol_at_zero = 0.0;
            const double c1 = kp / vs2, c2 = 2.0 * kp * gm / vs2;
            m.closed_log_scale = [c1, c2](double beta, double x) {
                const double lx = std::log(x), lb = std::log(beta);
                return (c1 * lx - c2 - 1.0) * lx - (c1 * lb - c2 - 1.0) * lb;
            };
            break;
        }
        case CatalogKind::mean_revert: {
            if (!(gm > 0.0)) reject("rate gamma must be strictly positive");
            if (ell < 0.5 - eps || ell > 1.0 + eps)
                reject("mean-revert family requires ell in [1/2, 1]");
            m.name = describe("mean-revert", p, payoff, price);
            m.drift = [kp, gm](double x) { return kp * (gm - x); };
            m.drift_deriv = [kp](double) { return -kp; };
            m.vol = [vs, ell](double x) { return vs * std::pow(x, ell); };
            m.growth_exponent = 2.0 * ell;
            m.limits.drift_at_zero = kp * gm;
            m.limits.vol_at_zero = 0.0;
            if (std::abs(ell - 0.5) < eps) {
                const double q = 2.0 * kp * gm / vs2, r = 2.0 * kp / vs2;
                m.closed_log_scale = [q, r](double beta, double x) {
                    return log_scale_exp_linear(q, r, beta, x);
                };
            } else if (std::abs(ell - 1.0) < eps) {
                const double q = 2.0 * kp / vs2, r = 2.0 * kp * gm / vs2;
                m.closed_log_scale = [q, r](double beta, double x) {
                    return q * std::log(x / beta) + r * (1.0 / x - 1.0 / beta);
                };
            } else {
                const double c1 = 2.0 * kp * gm / ((2.0 * ell - 1.0) * vs2);
                const double e1 = -(2.0 * ell - 1.0);
                const double c2 = kp / ((1.0 - ell) * vs2);
                const double e2 = 2.0 * (1.0 - ell);
                m.closed_log_scale = [c1, e1, c2, e2](double beta, double x) {
                    return c1 * (std::pow(x, e1) - std::pow(beta, e1)) +
                           c2 * (std::pow(x, e2) - std::pow(beta, e2));
                };
            }
            break;
        }
    }

    apply_payoff(m, payoff);
    return m;
}

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    const double la = std::log(lo), lb = std::log(hi);
    for (int i = 0; i < n; ++i)
        g[i] = std::exp(la + (lb - la) * i / double(n - 1));
    return g;
}

double bracketed_root(const RealFn& f, double lo, double hi, double tol) {
    boost::math::tools::eps_tolerance<double> no_tol(52);
    auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol * std::max(1.0, std::abs(b)); };
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, stop, it);
    return 0.5 * (r.first + r.second);
}

// Geometric probe with a Richardson-style consistency check: returns the
// limit if the last doublings agree, -inf if the values keep falling, and
// throws if neither pattern emerges.
double probe_limit_at_infinity(const ModelSpec& m, double from) {
    double prev2 = m.level(from), prev = m.level(from * 2.0);
    for (int j = 2; j <= 40; ++j) {
        const double v = m.level(from * std::pow(2.0, j));
        const double d1 = v - prev, d0 = prev - prev2;
        if (std::abs(d1) < 1e-9 * std::max(1.0, std::abs(v)) &&
            std::abs(d0) < 1e-8 * std::max(1.0, std::abs(v)))
            return v;
        prev2 = prev;
        prev = v;
    }
    if (prev < prev2 && prev < m.level(from) - 1.0) return -kInf;
    throw std::runtime_error(
        "limit probe at infinity inconsistent: supply limits.level_at_infinity");
}

double probe_level_at_zero(const ModelSpec& m) {
    double prev = m.level(std::pow(2.0, -1));
    for (int j = 2; j <= 40; ++j) {
        const double v = m.level(std::pow(2.0, -j));
        if (std::abs(v - prev) < 1e-9 * std::max(1.0, std::abs(v)) && j > 20) return v;
        prev = v;
    }
    throw std::runtime_error("limit probe at zero inconsistent: supply limits");
}

}  // namespace

CriticalPoints critical_points(const ModelSpec& model, const BracketConfig& search) {
    const auto grid = log_grid(search.lo, search.hi, search.probe_points);

    int sign_changes = 0;
    double bl = 0.0, bh = 0.0;
    double dprev = model.level_deriv(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double d = model.level_deriv(grid[i]);
        if (dprev > 0.0 && d <= 0.0) {
            if (sign_changes == 0) {
                bl = grid[i - 1];
                bh = grid[i];
            }
            ++sign_changes;
        } else if (dprev <= 0.0 && d > 0.0) {
            ++sign_changes;  // reversal: the shape assumption is broken
        }
        dprev = d;
    }
    if (sign_changes == 0)
        throw std::runtime_error(
            "no sign change of K b' + h' on the bracket: the single-peak "
            "assumption fails for this model");
    if (sign_changes > 1)
        throw std::runtime_error(
            "multiple sign changes of K b' + h' detected on the probe grid: "
            "ambiguous peak, refusing to pick one");

    CriticalPoints cp{};
    cp.xi = bracketed_root([&](double x) { return model.level_deriv(x); }, bl, bh,
                           search.root_tol);
    cp.lambda_bar = model.level(cp.xi);

    if (model.limits.level_at_infinity)
        cp.lambda_under = *model.limits.level_at_infinity;
    else
        cp.lambda_under = probe_limit_at_infinity(model, cp.xi);

    if (model.limits.drift_at_zero && model.limits.payoff_at_zero)
        cp.level_at_zero =
            model.price * *model.limits.drift_at_zero + *model.limits.payoff_at_zero;
    else
        cp.level_at_zero = probe_level_at_zero(model);

    return cp;
}

double rho_upper(const ModelSpec& model, const CriticalPoints& cp, double lambda) {
    if (!(lambda > cp.lambda_under && lambda < cp.lambda_bar))
        throw std::domain_error("rho_upper: lambda outside (lambda_under, lambda_bar)");
    double hi = 2.0 * cp.xi;
    int grow = 0;
    while (model.level(hi) - lambda >= 0.0) {
        hi *= 2.0;
        if (++grow > 200)
            throw std::runtime_error("rho_upper: no sign flip found growing right");
    }
    return bracketed_root([&](double x) { return model.level(x) - lambda; }, cp.xi, hi,
                          1e-13);
}

double rho_lower(const ModelSpec& model, const CriticalPoints& cp, double lambda) {
    if (!(lambda > cp.level_at_zero && lambda < cp.lambda_bar))
        throw std::domain_error(
            "rho_lower: lambda outside (K b(0)+h(0), lambda_bar), no lower root exists");
    double lo = 0.5 * cp.xi;
    int grow = 0;
    while (model.level(lo) - lambda >= 0.0) {
        lo *= 0.5;
        if (++grow > 400)
            throw std::runtime_error("rho_lower: no sign flip found shrinking left");
    }
    return bracketed_root([&](double x) { return model.level(x) - lambda; }, lo, cp.xi,
                          1e-13);
}

namespace {

void add_check(AssumptionReport& rep, std::string name, bool pass, double evidence,
               std::string detail = {}, bool applicable = true) {
    rep.checks.push_back({std::move(name), pass, applicable, evidence, std::move(detail)});
}

// Divergence certificate for int p' over geometric panels toward an endpoint.
// Returns true when the partial sums keep growing (the integral diverges).
bool scale_integral_diverges(const ScaleSpeed& ss, bool toward_zero, double* evidence) {
    using boost::math::quadrature::gauss_kronrod;
    const double w = std::log(2.0);
    const double u0 = std::log(ss.beta());
    double prev_panel = -1.0;
    double total = 0.0;
    int shrinking = 0;
    for (int j = 0; j < 60; ++j) {
        const double ua = toward_zero ? u0 - (j + 1) * w : u0 + j * w;
        const double ub = ua + w;
        // exponent blow-up mid-panel means p' itself explodes: divergent
        if (ss.log_scale_exponent(std::exp(0.5 * (ua + ub))) > 680.0) {
            *evidence = total;
            return true;
        }
        const double panel = gauss_kronrod<double, 15>::integrate(
            [&](double u) {
                const double s = std::exp(u);
                return ss.scale_derivative(s) * s;
            },
            ua, ub, 10, 1e-10);
        total += panel;
        if (prev_panel >= 0.0 && panel < 0.95 * prev_panel)
            ++shrinking;
        else
            shrinking = 0;
        if (shrinking >= 8) {
            // geometric decay: extrapolated tail is finite, integral converges
            const double r = panel / prev_panel;
            *evidence = total + panel * r / (1.0 - r);
            return false;
        }
        prev_panel = panel;
    }
    *evidence = total;
    return true;
}

}  // namespace

bool AssumptionReport::all_pass() const {
    for (const auto& c : checks)
        if (c.applicable && !c.pass) return false;
    return true;
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

AssumptionReport validate_assumptions(const ModelSpec& model, const ValidationConfig& cfg) {
    AssumptionReport rep;
    const auto grid = log_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);

    // A1: nondegenerate volatility on the grid
    {
        double worst = kInf, witness = grid.front();
        for (double x : grid) {
            const double v = model.vol(x);
            if (v < worst) {
                worst = v;
                witness = x;
            }
        }
        add_check(rep, "vol_positive", worst > 0.0, worst > 0.0 ? worst : witness,
                  worst > 0.0 ? "min sigma on grid" : "witness grid point");
    }

    // A1: sigma^2 <= C (1 + x^k), slope fit on the large-x half of the grid
    {
        const double k = model.growth_exponent;
        double c_fit = 0.0;
        double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
        int n = 0;
        for (double x : grid) {
            const double s2 = model.vol(x) * model.vol(x);
            c_fit = std::max(c_fit, s2 / (1.0 + std::pow(x, k)));
            if (x >= 1.0) {
                const double t = std::log1p(std::pow(x, k)), y = std::log(s2);
                st += t;
                sy += y;
                stt += t * t;
                sty += t * y;
                ++n;
            }
        }
        const double slope = (n * sty - st * sy) / (n * stt - st * st);
        add_check(rep, "growth_bound", std::isfinite(c_fit) && slope <= 1.05, c_fit,
                  "fitted C (numeric evidence only), log-log slope = " +
                      std::to_string(slope));
    }

    // A2: p_beta(0+) = -inf and p_beta(inf) = inf via extrapolated quadrature
    const double beta_ref = 1.0;
    QuadratureConfig quad;
    quad.abs_tol = quad.rel_tol = cfg.speed_tol;
    ScaleSpeed ss(model, beta_ref, quad);
    {
        double ev = 0.0;
        const bool div0 = scale_integral_diverges(ss, true, &ev);
        add_check(rep, "scale_divergence_zero", div0, ev,
                  div0 ? "partial sums of int p' grow toward 0"
                       : "int p' toward 0 converges: p_beta(0+) finite");
        double evi = 0.0;
        const bool divi = scale_integral_diverges(ss, false, &evi);
        add_check(rep, "scale_divergence_infinity", divi, evi,
                  divi ? "partial sums of int p' grow toward infinity"
                       : "int p' toward infinity converges: p_beta(inf) finite");
    }

    // A2: m_beta(]0,1[) < inf
    {
        const auto mi = ss.speed_integral([](double) { return 1.0; }, 0.0, 1.0);
        add_check(rep, "speed_integrable_zero", mi.converged, mi.value,
                  "m_beta(]0,1[) estimate");
    }

    // A3 (ergodicity): moment and total-mass integrability
    {
        const double k = model.growth_exponent;
        const auto mom = ss.speed_integral(
            [k](double s) { return std::pow(s, k); }, 0.0, kInf);
        const auto mass = ss.speed_integral([](double) { return 1.0; }, 0.0, kInf);
        add_check(rep, "ergodic_moment", mom.converged, mom.value,
                  "int s^k m_beta(ds) estimate");
        add_check(rep, "ergodic_mass", mass.converged, mass.value,
                  "m_beta(]0,inf[) estimate");
    }
    if (model.from_catalog) {
        add_check(rep, "vol_holder_half", true, 0.0,
                  "catalog coefficients satisfy the regularity by construction");
    } else {
        add_check(rep, "vol_holder_half", true, 0.0,
                  "not checkable numerically for user-supplied coefficients", false);
        rep.warnings.push_back(
            "Holder-1/2 regularity of sigma cannot be verified numerically; "
            "pathwise guarantees may not apply");
    }

    // A4: payoff bounded below, K > 0, single-peak level function
    {
        double hmin = kInf;
        for (double x : grid) hmin = std::min(hmin, model.payoff(x));
        add_check(rep, "payoff_bounded_below", std::isfinite(hmin), hmin,
                  "min h on grid");
        add_check(rep, "price_positive", model.price > 0.0, model.price);
        try {
            BracketConfig bc;
            bc.lo = cfg.grid_lo;
            bc.hi = cfg.grid_hi;
            const auto cp = critical_points(model, bc);
            const bool ordered =
                cp.lambda_under < cp.level_at_zero && cp.level_at_zero < cp.lambda_bar;
            add_check(rep, "level_shape", ordered, cp.xi,
                      ordered ? "xi located, lambda ordering holds"
                              : "lambda ordering lambda_under < Kb(0)+h(0) < "
                                "lambda_bar violated");
        } catch (const std::exception& e) {
            add_check(rep, "level_shape", false, 0.0, e.what());
        }
    }

    return rep;
}

}  // namespace harvest
