#include "cdagger/dagger/learner.hpp"

#include <algorithm>
#include <stdexcept>

namespace cdagger::dagger {

void LearnerConfig::validate() const {
    if (policy_layers.size() < 2 || policy_layers.front() != sim::kInputDim || policy_layers.back() != sim::kActionDim) {
        throw std::invalid_argument("policy_layers must map 12 inputs to 4 outputs");
    }
    if (classifier_layers.size() < 2 || classifier_layers.front() != sim::kInputDim || classifier_layers.back() != 1) {
        throw std::invalid_argument("classifier_layers must map 12 inputs to 1 output");
    }
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
    if (demos.trajectories == 0) throw std::invalid_argument("need at least one demonstration");
}

PolicyNet::PolicyNet(nn::Mlp net, double omega, double step_limit)
    : net_(std::move(net)), omega_(omega), step_limit_(step_limit) {
    if (net_.input_size() != sim::kInputDim || net_.output_size() != sim::kActionDim) {
        throw std::invalid_argument("PolicyNet: network must map 12 inputs to 4 outputs");
    }
    if (!(omega > 0.0)) throw std::invalid_argument("PolicyNet: omega must be positive");
}

sim::Action PolicyNet::act(std::span<const double> x) const {
    auto out = net_.forward(x);
    if (step_limit_ > 0.0) {
        for (std::size_t d = 0; d < 3; ++d) out[d] = std::clamp(out[d], -step_limit_, step_limit_);
    }
    return {x[0] + omega_ * out[0], x[1] + omega_ * out[1], x[2] + omega_ * out[2], std::clamp(out[3], 0.0, 1.0)};
}

nn::Dataset PolicyNet::targets(const nn::Dataset& pairs) const {
    nn::Dataset out{pairs.inputs, nn::Matrix(pairs.size(), sim::kActionDim)};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) out.targets(i, d) = (pairs.targets(i, d) - pairs.inputs(i, d)) / omega_;
        out.targets(i, 3) = pairs.targets(i, 3);
    }
    return out;
}

nn::TrainReport PolicyNet::fit(const nn::Dataset& pairs, const nn::TrainConfig& config) {
    return nn::train(net_, targets(pairs), config);
}

ActionStats action_stats(std::span<const PolicyNet> members, std::span<const double> x) {
    if (members.empty()) throw std::invalid_argument("action_stats: no members");
    std::vector<sim::Action> acts;
    acts.reserve(members.size());
    for (const auto& m : members) acts.push_back(m.act(x));
    ActionStats st;
    const double n = static_cast<double>(acts.size());
    for (std::size_t d = 0; d < sim::kActionDim; ++d) {
        double mean = 0.0;
        for (const auto& a : acts) mean += a[d];
        mean /= n;
        double var = 0.0;
        for (const auto& a : acts) var += (a[d] - mean) * (a[d] - mean);
        st.mean[d] = mean;
        st.variance[d] = var / n;
        st.aggregate += st.variance[d];
    }
    st.aggregate /= static_cast<double>(sim::kActionDim);
    return st;
}

SafetyClassifier::SafetyClassifier(nn::Mlp net, double safety_s) : net_(std::move(net)), s_(safety_s) {
    if (net_.output_size() != 1 || net_.head() != nn::OutputHead::Logistic) {
        throw std::invalid_argument("SafetyClassifier: need a single logistic output");
    }
    if (!(safety_s > 0.0)) throw std::invalid_argument("SafetyClassifier: s must be positive");
}

double SafetyClassifier::safe_probability(std::span<const double> x) const { return net_.forward(x)[0]; }

nn::TrainReport SafetyClassifier::fit_labels(const nn::Matrix& inputs, const nn::Matrix& labels,
                                             const nn::TrainConfig& config) {
    return nn::train(net_, nn::Dataset{inputs, labels}, config);
}

}  // namespace cdagger::dagger
