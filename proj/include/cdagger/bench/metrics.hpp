#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cdagger::bench {

/// Trailing mean; the first window-1 entries average the available prefix.
/// Throws std::invalid_argument on an empty trace or window == 0.
std::vector<double> moving_average(std::span<const int> trace, std::size_t window);
std::vector<double> moving_average(std::span<const double> trace, std::size_t window);

/// Length of the longest run of consecutive 1s.
std::size_t longest_error_run(std::span<const int> errs);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);

}  // namespace cdagger::bench
