#pragma once

#include <span>
#include <vector>

namespace cdagger::conformal {

/// Lower and upper signed residuals of a prediction against its label.
struct SignedResidual {
    double lo;  // prediction - label
    double hi;  // label - prediction
};

inline SignedResidual score_signed_residual(double prediction, double label) noexcept {
    return {prediction - label, label - prediction};
}

/// Miscoverage indicator. A score equal to the quantile is covered.
inline int coverage_error(double score, double quantile) noexcept { return score > quantile ? 1 : 0; }

struct Interval {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const noexcept { return lower.size(); }
    bool contains(std::span<const double> label) const;
    /// Euclidean norm of (upper - lower).
    double width_norm() const;
};

/// [prediction - q_lo, prediction + q_hi], elementwise.
Interval make_interval(std::span<const double> prediction, std::span<const double> q_lo,
                       std::span<const double> q_hi);

}  // namespace cdagger::conformal
