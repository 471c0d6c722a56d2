#include "cdagger/conformal/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdagger::conformal {

void ObservationEvent::validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("ObservationEvent: p must lie in (0, 1]");
    if (observed != score.has_value()) {
        throw std::invalid_argument("ObservationEvent: score must be present iff observed");
    }
}

ScalarTracker::ScalarTracker(double q0, double alpha, double bound_B, GammaSchedule schedule)
    : q_(q0), alpha_(alpha), bound_B_(bound_B), schedule_(std::move(schedule)) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ScalarTracker: alpha must lie in (0, 1)");
    if (!(bound_B > 0.0)) throw std::invalid_argument("ScalarTracker: bound B must be > 0");
    if (!std::isfinite(q0)) throw std::invalid_argument("ScalarTracker: q0 must be finite");
}

void ScalarTracker::apply(int err, double step) {
    const double delta = step * (static_cast<double>(err) - alpha_);
    q_ = rule_ == UpdateRule::Standard ? q_ + delta : q_ - delta;
    max_effective_step_ = std::max(max_effective_step_, step);
}

StepInfo ScalarTracker::qt_step(int err) {
    StepInfo info;
    info.gamma = schedule_.gamma(1.0);
    info.effective_step = schedule_.effective_step(1.0);
    info.err = err;
    apply(err, info.effective_step);
    ++step_count_;
    return info;
}

StepInfo ScalarTracker::iqt_step(const ObservationEvent& event) {
    event.validate();
    StepInfo info;
    info.gamma = schedule_.gamma(event.p);
    ++step_count_;
    if (!event.observed) return info;

    const double score = *event.score;
    info.err = coverage_error(score, q_);
    info.effective_step = schedule_.effective_step(event.p);
    apply(info.err, info.effective_step);
    schedule_.record(score);
    return info;
}

void ScalarTracker::reset_quantile(double q0) {
    q_ = q0;
    step_count_ = 0;
    max_effective_step_ = 0.0;
}

std::map<std::string, double> ScalarTracker::to_record(const std::string& prefix) const {
    std::map<std::string, double> out;
    out[prefix + "q"] = q_;
    out[prefix + "alpha"] = alpha_;
    out[prefix + "bound_B"] = bound_B_;
    out[prefix + "step_count"] = static_cast<double>(step_count_);
    out[prefix + "max_effective_step"] = max_effective_step_;
    schedule_.to_record(out, prefix + "schedule.");
    return out;
}

VectorIntervalTracker::VectorIntervalTracker(std::size_t dims, double q0, double alpha,
                                             const GammaSchedule& schedule, double bound_B)
    : alpha_(alpha) {
    if (dims == 0) throw std::invalid_argument("VectorIntervalTracker: dims must be >= 1");
    lo_.reserve(dims);
    hi_.reserve(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        lo_.emplace_back(q0, alpha, bound_B, schedule);
        hi_.emplace_back(q0, alpha, bound_B, schedule);
    }
}

std::vector<double> VectorIntervalTracker::q_lo() const {
    std::vector<double> out(lo_.size());
    std::transform(lo_.begin(), lo_.end(), out.begin(), [](const ScalarTracker& t) { return t.quantile(); });
    return out;
}

std::vector<double> VectorIntervalTracker::q_hi() const {
    std::vector<double> out(hi_.size());
    std::transform(hi_.begin(), hi_.end(), out.begin(), [](const ScalarTracker& t) { return t.quantile(); });
    return out;
}

Interval VectorIntervalTracker::interval(std::span<const double> prediction) const {
    if (prediction.size() != dims()) throw std::invalid_argument("VectorIntervalTracker: dimension mismatch");
    const auto lo = q_lo();
    const auto hi = q_hi();
    return make_interval(prediction, lo, hi);
}

std::vector<StepInfo> VectorIntervalTracker::iqt_step(const VectorObservation& event) {
    const std::size_t d = dims();
    if (event.observed && (event.score_lo.size() != d || event.score_hi.size() != d)) {
        throw std::invalid_argument("VectorIntervalTracker: score dimension mismatch");
    }
    std::vector<StepInfo> out;
    out.reserve(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto ev = event.observed ? ObservationEvent::seen(event.p, event.score_lo[i])
                                       : ObservationEvent::hidden(event.p);
        out.push_back(lo_[i].iqt_step(ev));
    }
    for (std::size_t i = 0; i < d; ++i) {
        const auto ev = event.observed ? ObservationEvent::seen(event.p, event.score_hi[i])
                                       : ObservationEvent::hidden(event.p);
        out.push_back(hi_[i].iqt_step(ev));
    }
    return out;
}

void VectorIntervalTracker::reset_quantiles(double q0) {
    for (auto& t : lo_) t.reset_quantile(q0);
    for (auto& t : hi_) t.reset_quantile(q0);
}

void VectorIntervalTracker::set_update_rule(UpdateRule rule) {
    for (auto& t : lo_) t.set_update_rule(rule);
    for (auto& t : hi_) t.set_update_rule(rule);
}

std::map<std::string, double> VectorIntervalTracker::to_record() const {
    std::map<std::string, double> out;
    out["dims"] = static_cast<double>(dims());
    out["alpha"] = alpha_;
    for (std::size_t d = 0; d < dims(); ++d) {
        out.merge(lo_[d].to_record("lo." + std::to_string(d) + "."));
        out.merge(hi_[d].to_record("hi." + std::to_string(d) + "."));
    }
    return out;
}

}  // namespace cdagger::conformal
