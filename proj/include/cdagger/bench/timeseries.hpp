#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdagger/bench/stream.hpp"
#include "cdagger/util/parallel.hpp"

namespace cdagger::bench {

struct BenchConfig {
    double alpha = 0.1;
    /// Constant observation probability; ignored when `p_sequence` is set.
    double p = 0.1;
    /// Per-timestep observation probabilities over the evaluation window.
    std::optional<std::vector<double>> p_sequence;
    double lr = 1.0;
    bool p_dependent = false;
    std::size_t lookback_k = 100;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t warmup = 50;
    std::size_t ar_order = 3;
    double q0 = 0.0;
    std::size_t ma_window = 50;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

/// Per-timestep record of one run, evaluated at t = warmup + i.
struct BenchStep {
    double y;
    double yhat;
    double lower;
    double upper;
    bool observed;
    int err;  // oracle miscoverage, known to the harness at every step
    double p;
};

/// Coverage-gap bound check for one of the two one-sided trackers.
struct SideBound {
    double gap;    // |mean oracle one-sided err - alpha/2|
    double bound;  // coverage_bound for the realized gamma/p sequence
    double bound_B;
};

struct BenchResult {
    std::uint64_t seed = 0;
    double marginal_coverage = 0.0;
    std::size_t longest_err_run = 0;
    double mean_interval_size = 0.0;
    std::vector<double> coverage_trace;
    std::vector<double> interval_trace;
    std::vector<BenchStep> steps;
    SideBound lower_side{};
    SideBound upper_side{};
};

/// Stream plus its rolling AR forecasts, computed once and shared by every
/// (seed, lr, variant) run on that stream.
struct PreparedStream {
    DatasetStream stream;
    std::size_t warmup;
    std::vector<double> forecasts;  // forecasts[i] predicts stream.values[warmup + i]
};

PreparedStream prepare_stream(DatasetStream stream, std::size_t warmup, std::size_t ar_order = 3);

/// One seeded run: two one-sided trackers (lower and upper signed residual)
/// each targeting alpha/2, Bernoulli(p_t) label reveals, metrics over the
/// oracle errors at every timestep.
BenchResult run_bench_seed(const PreparedStream& prepared, const BenchConfig& config, std::uint64_t seed);

/// All seeds of `config`. The parallel path fans seeds out over OpenMP;
/// results are identical to the serial path and ordered like config.seeds.
std::vector<BenchResult> run_bench(const PreparedStream& prepared, const BenchConfig& config,
                                   Execution exec = Execution::Parallel);

}  // namespace cdagger::bench
