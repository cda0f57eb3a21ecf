#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "harvest/model.hpp"

namespace harvest {

// Threshold-strategy simulation: initial impulse down to the threshold, then
// reflection by projection, full-truncation Euler for the coefficients.
struct SimConfig {
    double threshold = 1.0;  // beta; +inf simulates the uncontrolled dynamics
    double x0 = 0.0;         // initial state; 0 means "start at the threshold"
    double dt = 1e-3;
    double horizon = 200.0;  // T
    int paths = 256;         // N
    double burn_in = 0.0;    // fraction of T discarded before accumulating
    std::uint64_t seed = 0;
    double state_floor = 1e-12;      // coefficient truncation floor
    double max_floor_fraction = 0.1;  // scheme-failure threshold
    int histogram_bins = 200;
    double histogram_max = 0.0;  // 0 means threshold; required finite if uncontrolled
    double moment_exponent = 0.0;  // accumulate int X^k dt when > 0
    int threads = 1;               // 0 means hardware concurrency
    bool independent_seeds = true;  // false: all paths share the base seed
    int trace_windows = 20;

    double start_state() const { return x0 > 0.0 ? x0 : threshold; }
    // Throws std::invalid_argument on an invariant violation.
    void validate() const;
};

struct PathAccumulators {
    double payoff_integral = 0.0;  // int h(X) dt after burn-in
    double harvest = 0.0;          // zeta increments after burn-in (impulse incl. iff burn_in == 0)
    double harvest_total = 0.0;    // whole-path zeta_T
    double terminal_state = 0.0;
    double effective_time = 0.0;
    double time_average = 0.0;     // (payoff_integral + K harvest) / effective_time
    double moment_integral = 0.0;  // int X^k dt (uncontrolled moment diagnostics)
    long floor_events = 0;
    long steps = 0;
    std::vector<double> window_averages;  // running average at checkpoint times
    std::vector<double> histogram;        // occupation time per bin, after burn-in
};

// Throws std::runtime_error when floor events exceed max_floor_fraction of steps.
PathAccumulators simulate_path(const ModelSpec& model, const SimConfig& cfg,
                               std::uint64_t path_seed);

struct SimResult {
    double mean = 0.0;
    double stderr_mean = 0.0;  // sample std / sqrt(N)
    std::vector<double> per_path;
    double harvest_rate = 0.0;  // mean zeta_T / T
    std::vector<double> bin_edges;
    std::vector<double> histogram;  // normalized occupation (sums to 1)
    std::vector<double> trace;      // running-average trace of path 0
    double fluctuation_band = 0.0;  // spread of the last trace checkpoints
    long floor_events = 0;
};

// N independent paths with decorrelated seeds; deterministic for a given
// (cfg, seed) regardless of the thread count.
SimResult estimate_expected(const ModelSpec& model, const SimConfig& cfg);

// Single-path long-horizon running average with a convergence trace.
SimResult estimate_pathwise(const ModelSpec& model, const SimConfig& cfg);

struct OccupationReport {
    double sup_distance = 0.0;  // sup |empirical CDF - stationary CDF| at bin edges
    std::vector<double> edges;
    std::vector<double> empirical_cdf;
    std::vector<double> analytic_cdf;
};

// Empirical occupation on (0, beta] against the normalized speed density.
OccupationReport occupation_check(const ModelSpec& model, const SimConfig& cfg,
                                  const SimResult& result);

struct SweepRow {
    double beta = 0.0;
    double estimate = 0.0;
    double stderr_mean = 0.0;
    double oracle = 0.0;  // Lambda(beta)
};

std::vector<SweepRow> threshold_sweep(const ModelSpec& model, const SimConfig& base,
                                      const std::vector<double>& betas,
                                      const std::function<double(double)>& lambda_oracle);

// Splittable per-path stream: path i uses mix_seed(base, i).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

}  // namespace harvest
