#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdagger/conformal/schedule.hpp"
#include "cdagger/conformal/scores.hpp"

namespace cdagger::conformal {

/// One timestep's (possibly missing) label feedback. Scores are present iff
/// the label was observed; `p` is the probability the label would be observed.
struct ObservationEvent {
    bool observed = false;
    double p = 1.0;
    std::optional<double> score;

    static ObservationEvent hidden(double p) { return {false, p, std::nullopt}; }
    static ObservationEvent seen(double p, double score) { return {true, p, score}; }

    /// Throws std::invalid_argument on p outside (0, 1] or on score presence
    /// disagreeing with `observed`.
    void validate() const;
};

/// Vector-valued counterpart: per-dimension lower and upper scores.
struct VectorObservation {
    bool observed = false;
    double p = 1.0;
    std::vector<double> score_lo;
    std::vector<double> score_hi;

    static VectorObservation hidden(double p) { return {false, p, {}, {}}; }
    static VectorObservation seen(double p, std::vector<double> lo, std::vector<double> hi) {
        return {true, p, std::move(lo), std::move(hi)};
    }
};

/// What a single update did; the harness logs these to evaluate the bounds.
struct StepInfo {
    double gamma = 0.0;           // gamma_t at this step (logged even when unobserved)
    double effective_step = 0.0;  // gamma_t / p_t when observed, otherwise 0
    int err = -1;                 // miscoverage indicator when observed, -1 otherwise
};

/// Only for mutation testing of the verification suite.
enum class UpdateRule { Standard, SignFlipped };

/// Online quantile q_t of a scalar nonconformity score.
class ScalarTracker {
public:
    ScalarTracker(double q0, double alpha, double bound_B, GammaSchedule schedule);

    double quantile() const noexcept { return q_; }
    double alpha() const noexcept { return alpha_; }
    double bound() const noexcept { return bound_B_; }
    std::size_t step_count() const noexcept { return step_count_; }
    /// Running max of gamma_t / p_t over observed steps (0 before the first).
    double max_effective_step() const noexcept { return max_effective_step_; }
    const GammaSchedule& schedule() const noexcept { return schedule_; }

    /// gamma_t that the next update would use at probability p.
    double current_gamma(double p) const noexcept { return schedule_.gamma(p); }

    /// Plain quantile tracking update from a miscoverage indicator, p = 1.
    /// Does not touch the lookback history; use `observe` when scores exist.
    StepInfo qt_step(int err);

    /// Quantile tracking with a fully observed score (p = 1).
    StepInfo observe(double score) { return iqt_step(ObservationEvent::seen(1.0, score)); }

    /// Intermittent update: no change when unobserved, otherwise
    /// q += (gamma_t / p_t) * (err - alpha).
    StepInfo iqt_step(const ObservationEvent& event);

    /// Reset q (and the step counter) while keeping the schedule history.
    void reset_quantile(double q0);

    void set_update_rule(UpdateRule rule) noexcept { rule_ = rule; }

    std::map<std::string, double> to_record(const std::string& prefix = "") const;

private:
    void apply(int err, double step);

    double q_;
    double alpha_;
    double bound_B_;
    GammaSchedule schedule_;
    std::size_t step_count_ = 0;
    double max_effective_step_ = 0.0;
    UpdateRule rule_ = UpdateRule::Standard;
};

/// Per-dimension lower/upper quantiles around a vector prediction. Each of
/// the 2*d coordinates is an independent scalar process with its own copy of
/// the schedule (and so its own lookback history).
class VectorIntervalTracker {
public:
    VectorIntervalTracker(std::size_t dims, double q0, double alpha, const GammaSchedule& schedule,
                          double bound_B = 1.0);

    std::size_t dims() const noexcept { return lo_.size(); }
    double alpha() const noexcept { return alpha_; }
    std::vector<double> q_lo() const;
    std::vector<double> q_hi() const;
    const ScalarTracker& lo(std::size_t d) const { return lo_.at(d); }
    const ScalarTracker& hi(std::size_t d) const { return hi_.at(d); }

    Interval interval(std::span<const double> prediction) const;

    /// Per-dimension intermittent update. Returns per-coordinate step records,
    /// lower sides first then upper sides. Throws on dimension mismatch.
    std::vector<StepInfo> iqt_step(const VectorObservation& event);

    /// Resets every coordinate to q0 (lookback histories are kept).
    void reset_quantiles(double q0);

    void set_update_rule(UpdateRule rule);

    std::map<std::string, double> to_record() const;

private:
    double alpha_;
    std::vector<ScalarTracker> lo_;
    std::vector<ScalarTracker> hi_;
};

}  // namespace cdagger::conformal
