#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdagger/nn/mlp.hpp"
#include "cdagger/nn/train.hpp"
#include "cdagger/sim/reach_env.hpp"

namespace cdagger::dagger {

struct LearnerConfig {
    std::vector<std::size_t> policy_layers{12, 64, 128, 472, 512, 256, 64, 42, 4};
    std::vector<std::size_t> classifier_layers{12, 64, 128, 64, 42, 1};
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t initial_iterations = 200;
    std::size_t finetune_iterations = 100;
    std::size_t buffer_capacity = 300;
    // Largest learner step per axis in units of omega, matching the expert's
    // reach. Zero or less leaves the step unbounded.
    double step_limit = 1.0;
    nn::Optimizer optimizer = nn::Optimizer::Adam;
    sim::DemoConfig demos;

    void validate() const;
};

/// Network policy acting in position space. The xyz outputs are a step in
/// units of omega from the current position; the last output is the gripper
/// command, clamped to [0, 1].
class PolicyNet {
public:
    PolicyNet(nn::Mlp net, double omega, double step_limit = 0.0);

    sim::Action act(std::span<const double> x) const;

    /// Maps (x, absolute action) pairs to the network's regression targets.
    nn::Dataset targets(const nn::Dataset& pairs) const;

    nn::TrainReport fit(const nn::Dataset& pairs, const nn::TrainConfig& config);

    const nn::Mlp& net() const noexcept { return net_; }
    nn::Mlp& net() noexcept { return net_; }
    double omega() const noexcept { return omega_; }

private:
    nn::Mlp net_;
    double omega_;
    double step_limit_;
};

/// Action-space statistics of a group of policies at one input.
struct ActionStats {
    sim::Action mean{};
    sim::Action variance{};  // population variance per dimension
    double aggregate = 0.0;  // mean over dimensions
};

ActionStats action_stats(std::span<const PolicyNet> members, std::span<const double> x);

/// Binary classifier over states giving P(learner is within s of the expert).
class SafetyClassifier {
public:
    SafetyClassifier(nn::Mlp net, double safety_s);

    double safe_probability(std::span<const double> x) const;

    /// Labels each pair safe iff ||act(x) - a_h||_2 <= s and fits the network.
    template <class ActFn>
    nn::TrainReport fit(const nn::Dataset& pairs, ActFn&& act, const nn::TrainConfig& config) {
        return fit_labels(pairs.inputs, labels(pairs, act), config);
    }

    double safety_s() const noexcept { return s_; }
    const nn::Mlp& net() const noexcept { return net_; }

    template <class ActFn>
    nn::Matrix labels(const nn::Dataset& pairs, ActFn&& act) const {
        nn::Matrix y(pairs.size(), 1);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const sim::Action a = act(pairs.inputs.row(i));
            double sq = 0.0;
            for (std::size_t d = 0; d < sim::kActionDim; ++d) {
                const double diff = a[d] - pairs.targets(i, d);
                sq += diff * diff;
            }
            y(i, 0) = sq <= s_ * s_ ? 1.0 : 0.0;
        }
        return y;
    }

private:
    nn::TrainReport fit_labels(const nn::Matrix& inputs, const nn::Matrix& labels, const nn::TrainConfig& config);

    nn::Mlp net_;
    double s_;
};

}  // namespace cdagger::dagger
