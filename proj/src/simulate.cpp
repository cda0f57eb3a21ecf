#include "harvest/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "harvest/scale_speed.hpp"

namespace harvest {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
    if (!(horizon >= 100.0 * dt))
        throw std::invalid_argument("SimConfig: horizon must be at least 100*dt");
    if (paths < 1) throw std::invalid_argument("SimConfig: paths must be >= 1");
    if (!(burn_in >= 0.0 && burn_in < 1.0))
        throw std::invalid_argument("SimConfig: burn-in fraction must be in [0,1)");
    if (!(threshold > 0.0)) throw std::invalid_argument("SimConfig: threshold must be > 0");
    if (!(start_state() > 0.0))
        throw std::invalid_argument("SimConfig: initial state must be > 0");
    if (!(state_floor >= 0.0))
        throw std::invalid_argument("SimConfig: state floor must be >= 0");
    if (!std::isfinite(threshold) && !(histogram_max > 0.0))
        throw std::invalid_argument(
            "SimConfig: histogram_max required for uncontrolled runs");
    if (!std::isfinite(threshold) && !(x0 > 0.0 && std::isfinite(x0)))
        throw std::invalid_argument(
            "SimConfig: uncontrolled runs need a finite initial state");
}

PathAccumulators simulate_path(const ModelSpec& model, const SimConfig& cfg,
                               std::uint64_t path_seed) {
    cfg.validate();
    const double beta = cfg.threshold;
    const double dt = cfg.dt;
    const double sdt = std::sqrt(dt);
    const long n_steps = static_cast<long>(std::llround(cfg.horizon / dt));
    // step-indexed burn-in: comparing accumulated time against the burn horizon
    // is off-by-one sensitive to floating-point drift in t
    const long n_burn = static_cast<long>(std::llround(cfg.burn_in * n_steps));
    const double hist_max = cfg.histogram_max > 0.0 ? cfg.histogram_max : beta;

    PathAccumulators acc;
    acc.histogram.assign(cfg.histogram_bins, 0.0);
    acc.steps = n_steps;

    std::mt19937_64 rng(path_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double x = cfg.start_state();
    // initial impulse down to the threshold
    if (x > beta) {
        const double jump = x - beta;
        acc.harvest_total += jump;
        if (cfg.burn_in == 0.0) acc.harvest += jump;
        x = beta;
    }

    const int n_windows = std::max(cfg.trace_windows, 1);
    const long window_stride = std::max(n_steps / n_windows, 1L);
    acc.window_averages.reserve(n_windows);

    for (long i = 0; i < n_steps; ++i) {
        const bool counted = i >= n_burn;
        const double xf = std::max(x, cfg.state_floor);  // full truncation
        if (x < cfg.state_floor) ++acc.floor_events;

        if (counted) {
            acc.payoff_integral += model.payoff(xf) * dt;  // left-endpoint rule
            if (cfg.moment_exponent > 0.0)
                acc.moment_integral += std::pow(xf, cfg.moment_exponent) * dt;
            int bin = static_cast<int>(xf / hist_max * cfg.histogram_bins);
            bin = std::clamp(bin, 0, cfg.histogram_bins - 1);
            acc.histogram[bin] += dt;
            acc.effective_time += dt;
        }

        double prop = x + model.drift(xf) * dt + model.vol(xf) * sdt * gauss(rng);
        if (prop > beta) {
            const double dz = prop - beta;  // overflow credited to the harvest
            acc.harvest_total += dz;
            if (counted) acc.harvest += dz;
            prop = beta;
        }
        x = prop;

        if ((i + 1) % window_stride == 0 && acc.effective_time > 0.0 &&
            static_cast<int>(acc.window_averages.size()) < n_windows) {
            acc.window_averages.push_back(
                (acc.payoff_integral + model.price * acc.harvest) / acc.effective_time);
        }
    }

    acc.terminal_state = x;
    if (acc.effective_time > 0.0)
        acc.time_average =
            (acc.payoff_integral + model.price * acc.harvest) / acc.effective_time;

    if (acc.floor_events > cfg.max_floor_fraction * n_steps)
        throw std::runtime_error(
            "simulate_path: scheme failure, " + std::to_string(acc.floor_events) +
            " sub-floor states out of " + std::to_string(n_steps) +
            " steps; reduce dt");
    return acc;
}

namespace {

std::vector<PathAccumulators> run_paths(const ModelSpec& model, const SimConfig& cfg) {
    std::vector<PathAccumulators> paths(cfg.paths);
    const int n_threads =
        cfg.threads > 0
            ? cfg.threads
            : std::max(1u, std::thread::hardware_concurrency());

    auto worker = [&](int first, int last) {
        for (int i = first; i < last; ++i) {
            const std::uint64_t s =
                cfg.independent_seeds ? mix_seed(cfg.seed, i) : cfg.seed;
            paths[i] = simulate_path(model, cfg, s);
        }
    };

    if (n_threads <= 1 || cfg.paths == 1) {
        worker(0, cfg.paths);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (cfg.paths + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int a = t * chunk, b = std::min(cfg.paths, (t + 1) * chunk);
            if (a >= b) break;
            pool.emplace_back(worker, a, b);
        }
        for (auto& th : pool) th.join();
    }
    return paths;
}

SimResult aggregate(const ModelSpec& model, const SimConfig& cfg,
                    const std::vector<PathAccumulators>& paths) {
    SimResult res;
    const double hist_max =
        cfg.histogram_max > 0.0 ? cfg.histogram_max : cfg.threshold;
    res.histogram.assign(cfg.histogram_bins, 0.0);
    res.bin_edges.resize(cfg.histogram_bins + 1);
    for (int j = 0; j <= cfg.histogram_bins; ++j)
        res.bin_edges[j] = hist_max * j / double(cfg.histogram_bins);

    // fixed index order keeps the reduction bit-identical across thread counts
    double harvest_rate = 0.0, occupied = 0.0;
    res.per_path.reserve(paths.size());
    for (const auto& p : paths) {
        res.per_path.push_back(p.time_average);
        harvest_rate += p.harvest_total / cfg.horizon;
        res.floor_events += p.floor_events;
        for (int j = 0; j < cfg.histogram_bins; ++j) res.histogram[j] += p.histogram[j];
    }
    for (double m : res.histogram) occupied += m;
    if (occupied > 0.0)
        for (double& m : res.histogram) m /= occupied;

    const std::size_t n = res.per_path.size();
    double mean = 0.0;
    for (double v : res.per_path) mean += v;
    mean /= double(n);
    res.mean = mean;
    if (n >= 2) {
        double ss = 0.0;
        for (double v : res.per_path) ss += (v - mean) * (v - mean);
        res.stderr_mean = std::sqrt(ss / double(n - 1)) / std::sqrt(double(n));
    }
    res.harvest_rate = harvest_rate / double(n);

    res.trace = paths.front().window_averages;
    if (res.trace.size() >= 2) {
        const std::size_t tail = std::min<std::size_t>(5, res.trace.size());
        double lo = kInf, hi = -kInf;
        for (std::size_t i = res.trace.size() - tail; i < res.trace.size(); ++i) {
            lo = std::min(lo, res.trace[i]);
            hi = std::max(hi, res.trace[i]);
        }
        res.fluctuation_band = hi - lo;
    }
    return res;
}

}  // namespace

SimResult estimate_expected(const ModelSpec& model, const SimConfig& cfg) {
    cfg.validate();
    return aggregate(model, cfg, run_paths(model, cfg));
}

SimResult estimate_pathwise(const ModelSpec& model, const SimConfig& cfg) {
    SimConfig single = cfg;
    single.paths = 1;
    single.validate();
    return aggregate(model, single, run_paths(model, single));
}

OccupationReport occupation_check(const ModelSpec& model, const SimConfig& cfg,
                                  const SimResult& result) {
    OccupationReport rep;
    rep.edges = result.bin_edges;
    const int bins = static_cast<int>(result.histogram.size());
    rep.empirical_cdf.resize(bins);
    rep.analytic_cdf.resize(bins);

    // stationary law of the reflected diffusion: normalized speed measure
    QuadratureConfig quad;
    quad.abs_tol = quad.rel_tol = 1e-8;
    const double beta = std::isfinite(cfg.threshold) ? cfg.threshold
                                                     : rep.edges.back();
    ScaleSpeed ss(model, beta, quad);
    const auto one = [](double) { return 1.0; };

    std::vector<double> mass(bins, 0.0);
    const auto head = ss.speed_integral(one, 0.0, rep.edges[1]);
    mass[0] = head.value;
    for (int j = 1; j < bins; ++j)
        mass[j] = ss.speed_integral(one, rep.edges[j], rep.edges[j + 1]).value;
    double total = 0.0;
    for (double m : mass) total += m;

    double emp = 0.0, ana = 0.0, sup = 0.0;
    for (int j = 0; j < bins; ++j) {
        emp += result.histogram[j];
        ana += mass[j] / total;
        rep.empirical_cdf[j] = emp;
        rep.analytic_cdf[j] = ana;
        sup = std::max(sup, std::abs(emp - ana));
    }
    rep.sup_distance = sup;
    return rep;
}

std::vector<SweepRow> threshold_sweep(const ModelSpec& model, const SimConfig& base,
                                      const std::vector<double>& betas,
                                      const std::function<double(double)>& lambda_oracle) {
    if (betas.empty()) throw std::invalid_argument("threshold_sweep: empty beta grid");
    std::vector<SweepRow> rows;
    rows.reserve(betas.size());
    for (double beta : betas) {
        SimConfig cfg = base;
        cfg.threshold = beta;
        if (base.x0 <= 0.0) cfg.x0 = 0.0;  // start each run at its own threshold
        cfg.histogram_max = 0.0;
        const auto res = estimate_expected(model, cfg);
        rows.push_back({beta, res.mean, res.stderr_mean,
                        lambda_oracle ? lambda_oracle(beta) : 0.0});
    }
    return rows;
}

}  // namespace harvest
