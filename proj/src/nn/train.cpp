#include "cdagger/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdagger/util/rng.hpp"

namespace cdagger::nn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(std::vector<double> input, std::vector<double> target) {
    if (!entries_.empty() &&
        (input.size() != entries_.front().input.size() || target.size() != entries_.front().target.size())) {
        throw std::invalid_argument("ReplayBuffer: entry shape differs from existing entries");
    }
    entries_.push_back({std::move(input), std::move(target)});
    while (entries_.size() > capacity_) entries_.pop_front();
}

Dataset ReplayBuffer::to_dataset() const {
    Dataset d;
    if (entries_.empty()) return d;
    d.inputs.resize(entries_.size(), entries_.front().input.size());
    d.targets.resize(entries_.size(), entries_.front().target.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        std::copy(entries_[i].input.begin(), entries_[i].input.end(), d.inputs.row(i).begin());
        std::copy(entries_[i].target.begin(), entries_[i].target.end(), d.targets.row(i).begin());
    }
    return d;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
};

void gather(const Matrix& src, std::span<const std::size_t> rows, Matrix& dst) {
    dst.resize(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = src.row(rows[i]);
        std::copy(r.begin(), r.end(), dst.row(i).begin());
    }
}

}  // namespace

TrainReport train(Mlp& net, const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("train: empty data");
    if (data.inputs.cols() != net.input_size() || data.targets.cols() != net.output_size()) {
        throw std::invalid_argument("train: data shape does not match the network");
    }

    TrainReport report;
    report.initial_loss = loss(net, data.inputs, data.targets, config.exec);
    report.final_loss = report.initial_loss;
    if (config.iterations == 0) return report;

    Rng rng(config.seed, "shuffle");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::size_t cursor = 0;

    const std::size_t batch = std::min(config.batch_size, data.size());
    std::vector<std::size_t> rows(batch);
    Matrix bx, by;
    Gradients grads;
    AdamState adam;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        for (std::size_t i = 0; i < batch; ++i) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng.engine());
                cursor = 0;
            }
            rows[i] = order[cursor++];
        }
        gather(data.inputs, rows, bx);
        gather(data.targets, rows, by);
        const double batch_loss = loss_and_gradient(net, bx, by, grads, config.exec);
        if (!std::isfinite(batch_loss)) {
            throw TrainingDiverged("training diverged: non-finite loss at iteration " + std::to_string(it));
        }

        auto& layers = net.layers();
        if (config.optimizer == Optimizer::Sgd) {
            for (std::size_t l = 0; l < layers.size(); ++l) {
                auto w = layers[l].weight.flat();
                const auto g = grads.weight[l].flat();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * g[i];
                for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= config.learning_rate * grads.bias[l][i];
            }
        } else {
            if (adam.m.empty()) {
                adam.m.assign(net.parameter_count(), 0.0);
                adam.v.assign(net.parameter_count(), 0.0);
            }
            ++adam.t;
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
            const double step = config.learning_rate * std::sqrt(c2) / c1;
            std::size_t k = 0;
            auto update = [&](double& p, double g) {
                adam.m[k] = kBeta1 * adam.m[k] + (1.0 - kBeta1) * g;
                adam.v[k] = kBeta2 * adam.v[k] + (1.0 - kBeta2) * g * g;
                p -= step * adam.m[k] / (std::sqrt(adam.v[k]) + kEps * std::sqrt(c2));
                ++k;
            };
            for (std::size_t l = 0; l < layers.size(); ++l) {
                auto w = layers[l].weight.flat();
                const auto g = grads.weight[l].flat();
                for (std::size_t i = 0; i < w.size(); ++i) update(w[i], g[i]);
                for (std::size_t i = 0; i < layers[l].bias.size(); ++i) update(layers[l].bias[i], grads.bias[l][i]);
            }
        }
    }
    if (!net.all_finite()) throw TrainingDiverged("training diverged: non-finite parameters");
    report.iterations = config.iterations;
    report.final_loss = loss(net, data.inputs, data.targets, config.exec);
    if (!std::isfinite(report.final_loss)) throw TrainingDiverged("training diverged: non-finite final loss");
    return report;
}

namespace {

/// Loss on one pair plus the sign pattern of every hidden pre-activation.
double point_loss(const Mlp& net, const Matrix& x, const Matrix& y, std::vector<bool>& pattern) {
    ForwardCache cache;
    Matrix out;
    net.forward_batch(x, out, Execution::Serial, &cache);
    pattern.clear();
    for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) {
        for (double v : cache.pre[l].flat()) pattern.push_back(v > 0.0);
    }
    return loss(net, x, y, Execution::Serial);
}

}  // namespace

GradCheckResult grad_check(const Mlp& net, std::span<const double> x, std::span<const double> target, double h,
                           std::size_t sample, std::uint64_t seed, double floor) {
    if (x.size() != net.input_size() || target.size() != net.output_size()) {
        throw std::invalid_argument("grad_check: shape mismatch");
    }
    Matrix X(1, x.size()), Y(1, target.size());
    std::copy(x.begin(), x.end(), X.row(0).begin());
    std::copy(target.begin(), target.end(), Y.row(0).begin());

    Gradients grads;
    loss_and_gradient(net, X, Y, grads, Execution::Serial);
    const auto analytic = grads.flat();

    std::vector<std::size_t> indices(net.parameter_count());
    std::iota(indices.begin(), indices.end(), 0);
    if (sample > 0 && sample < indices.size()) {
        Rng rng(seed, "grad_check");
        std::shuffle(indices.begin(), indices.end(), rng.engine());
        indices.resize(sample);
        std::sort(indices.begin(), indices.end());
    }

    Mlp probe = net;
    std::vector<bool> base_pattern, plus_pattern, minus_pattern;
    point_loss(probe, X, Y, base_pattern);
    GradCheckResult result;
    for (std::size_t idx : indices) {
        double& p = probe.parameter(idx);
        const double saved = p;
        p = saved + h;
        const double up = point_loss(probe, X, Y, plus_pattern);
        p = saved - h;
        const double down = point_loss(probe, X, Y, minus_pattern);
        p = saved;
        if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
            ++result.excluded_at_kink;
            continue;
        }
        const double fd = (up - down) / (2.0 * h);
        const double a = analytic[idx];
        const double rel = std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), floor);
        result.max_relative_error = std::max(result.max_relative_error, rel);
        ++result.checked;
    }
    return result;
}

EnsembleStats ensemble_variance(std::span<const Mlp> members, std::span<const double> x) {
    if (members.size() < 2) throw std::invalid_argument("ensemble_variance: need at least two members");
    std::vector<std::vector<double>> outs;
    outs.reserve(members.size());
    for (const auto& m : members) {
        outs.push_back(m.forward(x));
        if (outs.back().size() != outs.front().size()) throw std::invalid_argument("ensemble_variance: output shapes differ");
    }
    const std::size_t dims = outs.front().size();
    const double n = static_cast<double>(members.size());
    EnsembleStats stats;
    stats.mean.assign(dims, 0.0);
    stats.variance.assign(dims, 0.0);
    for (const auto& o : outs) {
        for (std::size_t d = 0; d < dims; ++d) stats.mean[d] += o[d] / n;
    }
    for (const auto& o : outs) {
        for (std::size_t d = 0; d < dims; ++d) stats.variance[d] += (o[d] - stats.mean[d]) * (o[d] - stats.mean[d]) / n;
    }
    stats.aggregate = std::accumulate(stats.variance.begin(), stats.variance.end(), 0.0) / static_cast<double>(dims);
    return stats;
}

}  // namespace cdagger::nn
