#include "cdagger/conformal/scores.hpp"

#include <cmath>
#include <stdexcept>

namespace cdagger::conformal {

bool Interval::contains(std::span<const double> label) const {
    if (label.size() != lower.size()) throw std::invalid_argument("Interval::contains: dimension mismatch");
    for (std::size_t d = 0; d < label.size(); ++d) {
        if (label[d] < lower[d] || label[d] > upper[d]) return false;
    }
    return true;
}

double Interval::width_norm() const {
    double sq = 0.0;
    for (std::size_t d = 0; d < lower.size(); ++d) {
        const double w = upper[d] - lower[d];
        sq += w * w;
    }
    return std::sqrt(sq);
}

Interval make_interval(std::span<const double> prediction, std::span<const double> q_lo,
                       std::span<const double> q_hi) {
    if (prediction.size() != q_lo.size() || prediction.size() != q_hi.size()) {
        throw std::invalid_argument("make_interval: dimension mismatch");
    }
    Interval out;
    out.lower.resize(prediction.size());
    out.upper.resize(prediction.size());
    for (std::size_t d = 0; d < prediction.size(); ++d) {
        out.lower[d] = prediction[d] - q_lo[d];
        out.upper[d] = prediction[d] + q_hi[d];
    }
    return out;
}

}  // namespace cdagger::conformal
