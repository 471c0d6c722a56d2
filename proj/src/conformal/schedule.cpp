#include "cdagger/conformal/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdagger::conformal {

GammaSchedule::GammaSchedule(Kind kind, double rate, std::size_t k, bool p_dependent,
                             double initial_scale)
    : kind_(kind), rate_(rate), k_(k), p_dependent_(p_dependent), initial_scale_(initial_scale) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("GammaSchedule: rate must be > 0");
    if (kind == Kind::Lookback && k == 0) throw std::invalid_argument("GammaSchedule: lookback k must be >= 1");
    if (!(initial_scale > 0.0)) throw std::invalid_argument("GammaSchedule: initial scale must be > 0");
}

GammaSchedule GammaSchedule::constant(double gamma, bool p_dependent) {
    return {Kind::Constant, gamma, 0, p_dependent, 1.0};
}

GammaSchedule GammaSchedule::lookback(double lr, std::size_t k, bool p_dependent, double initial_scale) {
    return {Kind::Lookback, lr, k, p_dependent, initial_scale};
}

double GammaSchedule::scale() const noexcept {
    if (kind_ == Kind::Constant) return 1.0;
    double b = 0.0;
    for (double s : history_) b = std::max(b, s);
    return b > 0.0 ? b : initial_scale_;
}

double GammaSchedule::gamma(double p) const noexcept {
    const double base = rate_ * scale();
    return p_dependent_ ? base : base * p;
}

double GammaSchedule::effective_step(double p) const noexcept {
    // The p-independent family never divides, so it is exact for any p.
    const double base = rate_ * scale();
    return p_dependent_ ? base / p : base;
}

void GammaSchedule::record(double score) {
    if (kind_ != Kind::Lookback) return;
    history_.push_back(std::fabs(score));
    while (history_.size() > k_) history_.pop_front();
}

void GammaSchedule::to_record(std::map<std::string, double>& out, const std::string& prefix) const {
    out[prefix + "kind"] = kind_ == Kind::Constant ? 0.0 : 1.0;
    out[prefix + "rate"] = rate_;
    out[prefix + "k"] = static_cast<double>(k_);
    out[prefix + "p_dependent"] = p_dependent_ ? 1.0 : 0.0;
    out[prefix + "initial_scale"] = initial_scale_;
    out[prefix + "history_size"] = static_cast<double>(history_.size());
    out[prefix + "scale"] = scale();
}

}  // namespace cdagger::conformal
