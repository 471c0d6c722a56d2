#include "cdagger/dagger/gates.hpp"

#include <cmath>
#include <stdexcept>

namespace cdagger::dagger {

namespace {

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

void GateConfig::validate() const {
    check_probability(human_p, "human_p");
    check_probability(alpha, "alpha");
    if (!(robot.tau > 0.0)) throw std::invalid_argument("robot gate tau must be positive");
    if (!(robot.beta > 0.0)) throw std::invalid_argument("robot gate beta must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("conformal lr must be positive");
    if (lookback_k == 0) throw std::invalid_argument("lookback k must be positive");
    if (!(initial_scale > 0.0)) throw std::invalid_argument("initial_scale must be positive");
    if (!std::isfinite(q0)) throw std::invalid_argument("q0 must be finite");
}

double compose_obs_probability(double p_human, double p_robot) {
    check_probability(p_human, "human gate probability");
    check_probability(p_robot, "robot gate probability");
    return p_human + p_robot - p_human * p_robot;
}

double robot_gate_probability(double width, const RobotGate& gate) {
    if (gate.kind == RobotGate::Kind::HardThreshold) return width > gate.tau ? 1.0 : 0.0;
    const double z = gate.beta * (width - gate.tau);
    // Split on sign so exp never overflows.
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void BaselineConfig::validate() const {
    if (ensemble_members < 2) throw std::invalid_argument("ensemble needs at least two members");
    if (!(variance_tau > 0.0 && ensemble_safety_s > 0.0 && safe_safety_s > 0.0 && lazy_safety_s > 0.0)) {
        throw std::invalid_argument("baseline thresholds must be positive");
    }
    if (!(switch_back_fraction > 0.0)) throw std::invalid_argument("switch_back_fraction must be positive");
    if (!(sigma_multiplier > 0.0)) throw std::invalid_argument("sigma_multiplier must be positive");
    check_probability(classifier_cutoff, "classifier_cutoff");
}

bool ensemble_gate(double aggregate_variance, bool classifier_unsafe, const BaselineConfig& config) {
    return aggregate_variance > config.variance_tau || classifier_unsafe;
}

bool ensemble_covers(std::span<const double> mean, std::span<const double> variance,
                     std::span<const double> label, double sigma_multiplier) {
    if (mean.size() != variance.size() || mean.size() != label.size()) {
        throw std::invalid_argument("ensemble_covers: size mismatch");
    }
    for (std::size_t d = 0; d < mean.size(); ++d) {
        const double half = sigma_multiplier * std::sqrt(variance[d]);
        if (label[d] < mean[d] - half || label[d] > mean[d] + half) return false;
    }
    return true;
}

LazyGate::LazyGate(double safety_s, double switch_back_fraction) : s_(safety_s), fraction_(switch_back_fraction) {
    if (!(safety_s > 0.0) || !(switch_back_fraction > 0.0)) {
        throw std::invalid_argument("LazyGate: thresholds must be positive");
    }
}

bool LazyGate::begin_step(bool classifier_unsafe) {
    switched_ = false;
    if (mode_ == Mode::Autonomous && classifier_unsafe) {
        mode_ = Mode::Intervention;
        switched_ = true;
    }
    return mode_ == Mode::Intervention;
}

void LazyGate::end_step(double deviation) {
    if (mode_ == Mode::Intervention && !switched_ && deviation < switch_back_threshold()) {
        mode_ = Mode::Autonomous;
    }
}

}  // namespace cdagger::dagger
