#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>

namespace cdagger::conformal {

/// Step-size schedule for quantile tracking.
///
/// Two families:
///   - constant: gamma_t = gamma
///   - lookback-scaled: gamma_t = lr * B_t, where B_t is the largest absolute
///     score among the last k observed labels (unobserved steps contribute
///     nothing). Before any score is observed, or while every score in the
///     window is exactly zero, B_t falls back to `initial_scale`.
///
/// `p_dependent` selects how the observation probability enters. With
/// p_dependent = true the tracker divides gamma_t by p_t (IQT-pd). With
/// p_dependent = false gamma_t is itself multiplied by p_t, so the division
/// cancels and the applied step does not depend on p_t (IQT-pi).
class GammaSchedule {
public:
    enum class Kind { Constant, Lookback };

    static GammaSchedule constant(double gamma, bool p_dependent = true);
    static GammaSchedule lookback(double lr, std::size_t k, bool p_dependent = true,
                                  double initial_scale = 1.0);

    Kind kind() const noexcept { return kind_; }
    bool p_dependent() const noexcept { return p_dependent_; }
    double rate() const noexcept { return rate_; }
    std::size_t window() const noexcept { return k_; }
    double initial_scale() const noexcept { return initial_scale_; }

    /// B_t for the lookback family; 1 for the constant family.
    double scale() const noexcept;

    /// gamma_t at the current step given the observation probability p_t.
    double gamma(double p) const noexcept;

    /// gamma_t / p_t, the step actually applied on an observed update.
    double effective_step(double p) const noexcept;

    /// Record an observed score in the lookback history.
    void record(double score);

    void clear_history() { history_.clear(); }
    const std::deque<double>& history() const noexcept { return history_; }

    void to_record(std::map<std::string, double>& out, const std::string& prefix) const;

private:
    GammaSchedule(Kind kind, double rate, std::size_t k, bool p_dependent, double initial_scale);

    Kind kind_;
    double rate_;
    std::size_t k_;
    bool p_dependent_;
    double initial_scale_;
    std::deque<double> history_;
};

}  // namespace cdagger::conformal
