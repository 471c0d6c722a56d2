#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace cdagger::dagger {

struct RobotGate {
    enum class Kind { Sigmoid, HardThreshold };
    Kind kind = Kind::Sigmoid;
    double tau = 0.06;
    double beta = 100.0;
};

/// Observation model and interval calibration settings for the conformal
/// learner.
struct GateConfig {
    double human_p = 0.2;
    RobotGate robot;
    double alpha = 0.1;
    double lr = 0.6;
    std::size_t lookback_k = 100;
    double q0 = 0.01;
    // Lookback scale used before any label has been observed. Kept at the
    // action scale; a unit fallback would swamp the first update.
    double initial_scale = 0.01;

    void validate() const;
};

/// P(human or robot asks) for independent gates.
double compose_obs_probability(double p_human, double p_robot);

/// Probability that the robot requests a label given interval size u.
/// The hard threshold is strict, so u == tau does not query.
double robot_gate_probability(double width, const RobotGate& gate);

struct BaselineConfig {
    std::size_t ensemble_members = 3;
    double variance_tau = 0.06;
    double ensemble_safety_s = 0.03;
    double safe_safety_s = 0.01;
    double lazy_safety_s = 0.03;
    double switch_back_fraction = 0.1;
    double sigma_multiplier = 3.0;  // ensemble interval is mean +- this many std devs
    double classifier_cutoff = 0.5;  // classifier P(safe) below this flags the state

    void validate() const;
};

/// Query rule for the ensemble learner: disagreement or a flagged state.
bool ensemble_gate(double aggregate_variance, bool classifier_unsafe, const BaselineConfig& config);

/// Per-dimension mean +- k sigma containment.
bool ensemble_covers(std::span<const double> mean, std::span<const double> variance,
                     std::span<const double> label, double sigma_multiplier);

/// Two-state mode machine of the lazy learner. The classifier hands control
/// to the expert; control returns once the learner's prediction is within
/// fraction * s of the expert's action. At most one transition per step.
class LazyGate {
public:
    enum class Mode { Autonomous, Intervention };

    explicit LazyGate(double safety_s, double switch_back_fraction = 0.1);

    Mode mode() const noexcept { return mode_; }
    double switch_back_threshold() const noexcept { return fraction_ * s_; }

    /// Start of a step. Returns true while the expert is in control.
    bool begin_step(bool classifier_unsafe);

    /// After an expert-controlled step, with ||a_r - a_h||_2.
    void end_step(double deviation);

    void reset() noexcept { mode_ = Mode::Autonomous; }

private:
    double s_;
    double fraction_;
    Mode mode_ = Mode::Autonomous;
    bool switched_ = false;
};

}  // namespace cdagger::dagger
