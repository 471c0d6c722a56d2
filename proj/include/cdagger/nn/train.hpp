#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdagger/nn/mlp.hpp"

namespace cdagger::nn {

/// Supervised pairs stored row-wise.
struct Dataset {
    Matrix inputs;
    Matrix targets;

    std::size_t size() const noexcept { return inputs.rows(); }
    bool empty() const noexcept { return inputs.rows() == 0; }
};

/// Fixed-capacity FIFO of (input, action) pairs; inserting past capacity
/// evicts the oldest entry.
class ReplayBuffer {
public:
    struct Entry {
        std::vector<double> input;
        std::vector<double> target;
    };

    explicit ReplayBuffer(std::size_t capacity = 300);

    void push(std::vector<double> input, std::vector<double> target);
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return entries_.empty(); }
    const std::deque<Entry>& entries() const noexcept { return entries_; }

    Dataset to_dataset() const;

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t iterations = 200;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    Execution exec = Execution::Parallel;

    void validate() const;
};

struct TrainReport {
    double initial_loss = 0.0;  // full-data loss before the first step
    double final_loss = 0.0;    // full-data loss after the last step
    std::size_t iterations = 0;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minibatch gradient descent on the mean loss of `net`'s head. Minibatches
/// walk a seeded permutation of the data and reshuffle after each pass.
/// Throws std::invalid_argument on empty data and TrainingDiverged when the
/// loss or any parameter becomes non-finite.
TrainReport train(Mlp& net, const Dataset& data, const TrainConfig& config);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded_at_kink = 0;  // perturbation flipped a rectifier
};

/// Compares backprop against central differences with step h on the loss
/// of a single (x, target) pair. Checks every parameter, or a seeded sample
/// of `sample` of them when sample > 0. Parameters whose +-h perturbation
/// changes any rectifier's on/off pattern are excluded and counted.
/// Relative error is |a - f| / max(|a| + |f|, floor).
GradCheckResult grad_check(const Mlp& net, std::span<const double> x, std::span<const double> target,
                           double h = 1e-5, std::size_t sample = 0, std::uint64_t seed = 0,
                           double floor = 1e-8);

struct EnsembleStats {
    std::vector<double> mean;
    std::vector<double> variance;  // population variance per output dimension
    double aggregate = 0.0;        // mean of `variance` over dimensions
};

/// Throws std::invalid_argument with fewer than two members or mismatched
/// shapes.
EnsembleStats ensemble_variance(std::span<const Mlp> members, std::span<const double> x);

}  // namespace cdagger::nn
