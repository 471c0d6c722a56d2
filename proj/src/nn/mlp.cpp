#include "cdagger/nn/mlp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cdagger/nn/kernels.hpp"
#include "cdagger/util/rng.hpp"

namespace cdagger::nn {

namespace {

constexpr const char* kMagic = "cdagger-mlp";
constexpr int kFormatVersion = 1;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void relu_inplace(Matrix& m) {
    for (double& v : m.flat()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, OutputHead head, std::uint64_t seed) : head_(head) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    Rng rng(seed, "mlp_init");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        if (in == 0 || out == 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
        DenseLayer layer{Matrix(out, in), std::vector<double>(out)};
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : layer.weight.flat()) w = rng.uniform(-bound, bound);
        for (double& b : layer.bias) b = rng.uniform(-bound, bound);
        layers_.push_back(std::move(layer));
    }
}

Mlp::Mlp(std::vector<DenseLayer> layers, OutputHead head) : layers_(std::move(layers)), head_(head) { check_shapes(); }

void Mlp::check_shapes() const {
    if (layers_.empty()) throw std::invalid_argument("Mlp: no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].bias.size() != layers_[l].outputs()) throw std::invalid_argument("Mlp: bias size mismatch");
        if (l > 0 && layers_[l].inputs() != layers_[l - 1].outputs()) {
            throw std::invalid_argument("Mlp: consecutive layer dimensions differ");
        }
    }
}

std::size_t Mlp::input_size() const { return layers_.at(0).inputs(); }
std::size_t Mlp::output_size() const { return layers_.back().outputs(); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

std::vector<std::size_t> Mlp::layer_sizes() const {
    std::vector<std::size_t> sizes{input_size()};
    for (const auto& l : layers_) sizes.push_back(l.outputs());
    return sizes;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    if (x.size() != input_size()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    std::vector<double> h(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        next.assign(layer.bias.begin(), layer.bias.end());
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            const auto w = layer.weight.row(o);
            double s = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * h[i];
            next[o] += s;
        }
        if (l + 1 < layers_.size()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        }
        h.swap(next);
    }
    if (head_ == OutputHead::Logistic) {
        for (double& v : h) v = sigmoid(v);
    }
    return h;
}

void Mlp::forward_batch(const Matrix& X, Matrix& out, Execution exec, ForwardCache* cache) const {
    if (X.cols() != input_size()) throw std::invalid_argument("Mlp::forward_batch: input dimension mismatch");
    if (cache) {
        cache->inputs.resize(layers_.size());
        cache->pre.resize(layers_.size());
        cache->inputs[0] = X;
    }
    Matrix h = X;
    Matrix z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        kernels::gemm_nt(exec, h, layers_[l].weight, z);
        kernels::add_bias(exec, z, layers_[l].bias);
        if (cache) cache->pre[l] = z;
        h = z;
        if (l + 1 < layers_.size()) {
            relu_inplace(h);
            if (cache) cache->inputs[l + 1] = h;
        }
    }
    if (head_ == OutputHead::Logistic) {
        for (double& v : h.flat()) v = sigmoid(v);
    }
    out = std::move(h);
    if (cache) cache->output = out;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
        flat.insert(flat.end(), l.weight.flat().begin(), l.weight.flat().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void Mlp::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("Mlp::set_parameters: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (double& w : l.weight.flat()) w = flat[k++];
        for (double& b : l.bias) b = flat[k++];
    }
}

double& Mlp::parameter(std::size_t index) {
    for (auto& l : layers_) {
        if (index < l.weight.size()) return l.weight.flat()[index];
        index -= l.weight.size();
        if (index < l.bias.size()) return l.bias[index];
        index -= l.bias.size();
    }
    throw std::out_of_range("Mlp::parameter: index out of range");
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_) {
        for (double w : l.weight.flat()) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : l.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

void Mlp::save(std::ostream& out) const {
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "head " << (head_ == OutputHead::Linear ? "linear" : "logistic") << '\n';
    const auto sizes = layer_sizes();
    out << "layers " << sizes.size();
    for (auto s : sizes) out << ' ' << s;
    out << '\n' << std::setprecision(17);
    for (const auto& l : layers_) {
        for (std::size_t r = 0; r < l.weight.rows(); ++r) {
            const auto row = l.weight.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
            out << '\n';
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) out << (i ? " " : "") << l.bias[i];
        out << '\n';
    }
}

Mlp Mlp::load(std::istream& in) {
    std::string magic, key, head;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw std::runtime_error("Mlp::load: not an mlp parameter file");
    if (version != kFormatVersion) throw std::runtime_error("Mlp::load: unsupported format version " + std::to_string(version));
    if (!(in >> key >> head) || key != "head") throw std::runtime_error("Mlp::load: missing head");
    OutputHead h;
    if (head == "linear") {
        h = OutputHead::Linear;
    } else if (head == "logistic") {
        h = OutputHead::Logistic;
    } else {
        throw std::runtime_error("Mlp::load: unknown head '" + head + "'");
    }
    std::size_t count = 0;
    if (!(in >> key >> count) || key != "layers" || count < 2) throw std::runtime_error("Mlp::load: bad layer header");
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) {
        if (!(in >> s)) throw std::runtime_error("Mlp::load: bad layer sizes");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < count; ++l) {
        DenseLayer layer{Matrix(sizes[l + 1], sizes[l]), std::vector<double>(sizes[l + 1])};
        for (double& w : layer.weight.flat()) {
            if (!(in >> w)) throw std::runtime_error("Mlp::load: truncated weights");
        }
        for (double& b : layer.bias) {
            if (!(in >> b)) throw std::runtime_error("Mlp::load: truncated biases");
        }
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers), h);
}

void Mlp::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    save(out);
}

Mlp Mlp::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return load(in);
}

bool Mlp::operator==(const Mlp& other) const {
    if (head_ != other.head_ || layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (!(layers_[l].weight == other.layers_[l].weight) || layers_[l].bias != other.layers_[l].bias) return false;
    }
    return true;
}

void Gradients::resize_like(const Mlp& net) {
    weight.resize(net.layers().size());
    bias.resize(net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        weight[l].resize(net.layers()[l].outputs(), net.layers()[l].inputs());
        bias[l].assign(net.layers()[l].outputs(), 0.0);
    }
}

std::vector<double> Gradients::flat() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.insert(out.end(), weight[l].flat().begin(), weight[l].flat().end());
        out.insert(out.end(), bias[l].begin(), bias[l].end());
    }
    return out;
}

double loss_and_gradient(const Mlp& net, const Matrix& X, const Matrix& Y, Gradients& grads, Execution exec) {
    if (X.rows() != Y.rows() || Y.cols() != net.output_size()) throw std::invalid_argument("loss_and_gradient: shape mismatch");
    if (X.rows() == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
    ForwardCache cache;
    Matrix out;
    net.forward_batch(X, out, exec, &cache);

    const double count = static_cast<double>(Y.size());
    Matrix delta(out.rows(), out.cols());
    double total = 0.0;
    if (net.head() == OutputHead::Linear) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double diff = out.flat()[i] - Y.flat()[i];
            total += diff * diff;
            delta.flat()[i] = 2.0 * diff / count;
        }
    } else {
        const auto& logits = cache.pre.back();
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double z = logits.flat()[i];
            const double t = Y.flat()[i];
            total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
            delta.flat()[i] = (out.flat()[i] - t) / count;
        }
    }

    grads.resize_like(net);
    const auto& layers = net.layers();
    Matrix back;
    for (std::size_t l = layers.size(); l-- > 0;) {
        kernels::gemm_tn(exec, delta, cache.inputs[l], grads.weight[l]);
        kernels::column_sums(delta, grads.bias[l]);
        if (l == 0) break;
        kernels::gemm_nn(exec, delta, layers[l].weight, back);
        const auto& pre = cache.pre[l - 1];
        for (std::size_t i = 0; i < back.size(); ++i) {
            if (!(pre.flat()[i] > 0.0)) back.flat()[i] = 0.0;
        }
        std::swap(delta, back);
    }
    return total / count;
}

double loss(const Mlp& net, const Matrix& X, const Matrix& Y, Execution exec) {
    if (X.rows() != Y.rows() || Y.cols() != net.output_size()) throw std::invalid_argument("loss: shape mismatch");
    Matrix out;
    ForwardCache cache;
    const bool logistic = net.head() == OutputHead::Logistic;
    net.forward_batch(X, out, exec, logistic ? &cache : nullptr);
    double total = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!logistic) {
            const double diff = out.flat()[i] - Y.flat()[i];
            total += diff * diff;
        } else {
            const double z = cache.pre.back().flat()[i];
            const double t = Y.flat()[i];
            total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
        }
    }
    return total / static_cast<double>(Y.size());
}

}  // namespace cdagger::nn
