#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "cdagger/conformal/tracker.hpp"

namespace cdagger::conformal {

struct WeightedScore {
    double score;
    double p;  // probability with which this score was observed
};

/// inf{ m : (1/n) * sum_i (1/p_i) 1[s_i <= m] >= level } over n observed
/// scores.
///
/// Conventions: level <= 0 gives -inf; level > 1, or any level the weighted
/// mass never reaches, gives +inf. Throws std::invalid_argument on an empty
/// window when 0 < level <= 1.
double weighted_empirical_quantile(std::span<const WeightedScore> window, double level);

/// Intermittent adaptive conformal inference on the symmetric absolute
/// residual. The interval radius is the weighted empirical quantile of the
/// observed scores at level 1 - alpha_t; alpha_t moves by
/// (gamma / p_t) * (target - err_t) on observed steps only.
class AciTracker {
public:
    /// alpha_1 defaults to the target.
    AciTracker(double target_alpha, double gamma, std::size_t lookback_k,
               std::optional<double> alpha0 = std::nullopt);

    double alpha_t() const noexcept { return alpha_t_; }
    double gamma() const noexcept { return gamma_; }
    double target_alpha() const noexcept { return target_; }
    /// Running minimum of p over every step seen, observed or not.
    double min_p() const noexcept { return min_p_; }
    const std::deque<WeightedScore>& window() const noexcept { return window_; }

    /// Radius of the current interval. +inf while no score has been observed.
    double radius() const;

    /// Miscoverage of `score` under the current radius.
    int error(double score) const;

    /// Returns err_t when observed, -1 otherwise.
    int iaci_step(const ObservationEvent& event);

    /// Update from an externally computed error (used by the unit examples).
    void iaci_step_with_error(const ObservationEvent& event, int err);

    std::map<std::string, double> to_record() const;

private:
    void push(double score, double p);

    double alpha_t_;
    double gamma_;
    double target_;
    std::size_t k_;
    double min_p_ = 1.0;
    std::deque<WeightedScore> window_;
};

}  // namespace cdagger::conformal
