#include "cdagger/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cdagger::bench {

namespace {

template <typename T>
std::vector<double> trailing_mean(std::span<const T> trace, std::size_t window) {
    if (trace.empty()) throw std::invalid_argument("moving_average: empty trace");
    if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(trace.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        sum += static_cast<double>(trace[i]);
        if (i >= window) sum -= static_cast<double>(trace[i - window]);
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

}  // namespace

std::vector<double> moving_average(std::span<const int> trace, std::size_t window) {
    return trailing_mean(trace, window);
}

std::vector<double> moving_average(std::span<const double> trace, std::size_t window) {
    return trailing_mean(trace, window);
}

std::size_t longest_error_run(std::span<const int> errs) {
    std::size_t best = 0;
    std::size_t run = 0;
    for (int e : errs) {
        run = e != 0 ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace cdagger::bench
