#include "cdagger/bench/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdagger/bench/metrics.hpp"
#include "cdagger/conformal/bounds.hpp"
#include "cdagger/conformal/tracker.hpp"
#include "cdagger/forecast/ar_model.hpp"
#include "cdagger/util/rng.hpp"

namespace cdagger::bench {

using conformal::GammaSchedule;
using conformal::ObservationEvent;
using conformal::ScalarTracker;

void BenchConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bench config: alpha must lie in (0, 1)");
    if (!(lr > 0.0)) throw std::invalid_argument("bench config: lr must be > 0");
    if (!p_sequence && !(p > 0.0 && p <= 1.0)) throw std::invalid_argument("bench config: p must lie in (0, 1]");
    if (p_sequence) {
        for (double v : *p_sequence) {
            if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("bench config: p sequence values must lie in (0, 1]");
        }
    }
    if (lookback_k == 0) throw std::invalid_argument("bench config: lookback_k must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("bench config: no seeds");
    if (ma_window == 0) throw std::invalid_argument("bench config: ma_window must be >= 1");
}

PreparedStream prepare_stream(DatasetStream stream, std::size_t warmup, std::size_t ar_order) {
    stream.validate();
    if (stream.values.size() <= warmup) throw std::invalid_argument("stream shorter than warmup");
    auto forecasts = forecast::rolling_forecast(stream.values, warmup, ar_order);
    return {std::move(stream), warmup, std::move(forecasts)};
}

namespace {

SideBound side_bound(std::span<const double> scores, std::span<const int> errs, std::span<const double> gammas,
                     std::span<const double> ps, double alpha_side, double q0) {
    // Signed scores live in [-b, b]; shifting scores and q by b puts them in
    // [0, 2b] without changing any update.
    double b = std::fabs(q0);
    for (double s : scores) b = std::max(b, std::fabs(s));
    const double bound_B = std::max(2.0 * b, 1e-12);
    double mean_err = 0.0;
    for (int e : errs) mean_err += e;
    mean_err /= static_cast<double>(errs.size());
    return {std::fabs(mean_err - alpha_side), conformal::coverage_bound(bound_B, gammas, ps), bound_B};
}

}  // namespace

BenchResult run_bench_seed(const PreparedStream& prepared, const BenchConfig& config, std::uint64_t seed) {
    config.validate();
    const auto& values = prepared.stream.values;
    const std::size_t warmup = prepared.warmup;
    const std::size_t n = prepared.forecasts.size();
    if (config.p_sequence && config.p_sequence->size() != n) {
        throw std::invalid_argument("bench config: p sequence length does not match the evaluation window");
    }

    const double side_alpha = config.alpha / 2.0;
    const auto schedule = GammaSchedule::lookback(config.lr, config.lookback_k, config.p_dependent);
    ScalarTracker lower(config.q0, side_alpha, 1.0, schedule);
    ScalarTracker upper(config.q0, side_alpha, 1.0, schedule);
    Rng obs_rng(seed, "obs");

    BenchResult result;
    result.seed = seed;
    result.steps.reserve(n);
    std::vector<int> errs(n), errs_lo(n), errs_hi(n);
    std::vector<double> s_lo(n), s_hi(n), g_lo(n), g_hi(n), ps(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double y = values[warmup + i];
        const double yhat = prepared.forecasts[i];
        const double p = config.p_sequence ? (*config.p_sequence)[i] : config.p;
        const auto res = conformal::score_signed_residual(yhat, y);

        BenchStep step{y, yhat, yhat - lower.quantile(), yhat + upper.quantile(), false, 0, p};
        errs_lo[i] = conformal::coverage_error(res.lo, lower.quantile());
        errs_hi[i] = conformal::coverage_error(res.hi, upper.quantile());
        step.err = (y < step.lower || y > step.upper) ? 1 : 0;
        errs[i] = step.err;
        s_lo[i] = res.lo;
        s_hi[i] = res.hi;
        ps[i] = p;
        g_lo[i] = lower.current_gamma(p);
        g_hi[i] = upper.current_gamma(p);

        step.observed = obs_rng.bernoulli(p);
        if (step.observed) {
            lower.iqt_step(ObservationEvent::seen(p, res.lo));
            upper.iqt_step(ObservationEvent::seen(p, res.hi));
        } else {
            lower.iqt_step(ObservationEvent::hidden(p));
            upper.iqt_step(ObservationEvent::hidden(p));
        }
        result.steps.push_back(step);
    }

    std::vector<int> covered(n);
    result.interval_trace.resize(n);
    double width_sum = 0.0;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        covered[i] = 1 - errs[i];
        result.interval_trace[i] = result.steps[i].upper - result.steps[i].lower;
        width_sum += result.interval_trace[i];
        err_sum += errs[i];
    }
    result.marginal_coverage = 1.0 - err_sum / static_cast<double>(n);
    result.longest_err_run = longest_error_run(errs);
    result.mean_interval_size = width_sum / static_cast<double>(n);
    result.coverage_trace = moving_average(covered, config.ma_window);
    result.lower_side = side_bound(s_lo, errs_lo, g_lo, ps, side_alpha, config.q0);
    result.upper_side = side_bound(s_hi, errs_hi, g_hi, ps, side_alpha, config.q0);
    return result;
}

std::vector<BenchResult> run_bench(const PreparedStream& prepared, const BenchConfig& config, Execution exec) {
    config.validate();
    const auto count = static_cast<std::ptrdiff_t>(config.seeds.size());
    std::vector<BenchResult> results(config.seeds.size());
    if (exec == Execution::Serial) {
        for (std::ptrdiff_t i = 0; i < count; ++i) results[i] = run_bench_seed(prepared, config, config.seeds[i]);
        return results;
    }
    // Exceptions cannot leave the parallel region, so check inputs here.
    if (config.p_sequence && config.p_sequence->size() != prepared.forecasts.size()) {
        throw std::invalid_argument("bench config: p sequence length does not match the evaluation window");
    }
    // Each seed is an independent sequential run with its own RNG stream.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) results[i] = run_bench_seed(prepared, config, config.seeds[i]);
    return results;
}

}  // namespace cdagger::bench
