#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cdagger/nn/matrix.hpp"
#include "cdagger/util/parallel.hpp"

namespace cdagger::nn {

enum class OutputHead { Linear, Logistic };

struct DenseLayer {
    Matrix weight;  // out x in
    std::vector<double> bias;

    std::size_t inputs() const noexcept { return weight.cols(); }
    std::size_t outputs() const noexcept { return weight.rows(); }
};

/// Per-layer activations kept from a batched forward pass for backprop.
struct ForwardCache {
    std::vector<Matrix> inputs;  // inputs[l] feeds layer l; inputs[0] is the batch
    std::vector<Matrix> pre;     // pre-activations of every layer
    Matrix output;               // after the head (identity or logistic)
};

/// Feedforward network with rectifier hidden layers and a linear or
/// logistic output head.
class Mlp {
public:
    Mlp() = default;

    /// layer_sizes = {input, hidden..., output}. Weights and biases are drawn
    /// uniformly from +-1/sqrt(fan_in) with the given seed.
    Mlp(std::vector<std::size_t> layer_sizes, OutputHead head, std::uint64_t seed);

    /// Network with explicit parameters; throws on incompatible shapes.
    Mlp(std::vector<DenseLayer> layers, OutputHead head);

    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;
    std::vector<std::size_t> layer_sizes() const;
    OutputHead head() const noexcept { return head_; }

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    /// Single-input evaluation. Throws on dimension mismatch.
    std::vector<double> forward(std::span<const double> x) const;

    /// Batched evaluation, one row per input. Fills `cache` when given.
    void forward_batch(const Matrix& X, Matrix& out, Execution exec = Execution::Parallel,
                       ForwardCache* cache = nullptr) const;

    /// Flat parameter view: layer 0 weights, layer 0 bias, layer 1 weights, ...
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    double& parameter(std::size_t index);

    bool all_finite() const;

    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path);

    bool operator==(const Mlp&) const;

private:
    void check_shapes() const;

    std::vector<DenseLayer> layers_;
    OutputHead head_ = OutputHead::Linear;
};

/// Gradient of the mean loss with the same layout as the network.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    void resize_like(const Mlp& net);
    std::vector<double> flat() const;
};

/// Mean loss over the batch: mean squared error over all output entries for
/// a linear head, mean binary cross-entropy for a logistic head. Fills
/// `grads` with d(loss)/d(parameters).
double loss_and_gradient(const Mlp& net, const Matrix& X, const Matrix& Y, Gradients& grads,
                         Execution exec = Execution::Parallel);

double loss(const Mlp& net, const Matrix& X, const Matrix& Y, Execution exec = Execution::Parallel);

}  // namespace cdagger::nn
