#include "cdagger/conformal/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cdagger::conformal {

double coverage_bound(double bound_B, std::span<const double> gammas, std::span<const double> ps) {
    if (gammas.empty()) throw std::invalid_argument("coverage_bound: empty sequence");
    if (gammas.size() != ps.size()) throw std::invalid_argument("coverage_bound: length mismatch");

    double max_ratio = 0.0;
    double delta_l1 = 0.0;
    double prev_inv = 0.0;
    for (std::size_t t = 0; t < gammas.size(); ++t) {
        const double g = gammas[t];
        const double p = ps[t];
        if (!(g > 0.0)) throw std::invalid_argument("coverage_bound: gamma must be > 0");
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("coverage_bound: p must lie in (0, 1]");
        max_ratio = std::max(max_ratio, g / p);
        const double inv = 1.0 / g;
        delta_l1 += std::fabs(inv - prev_inv);
        prev_inv = inv;
    }
    const double T = static_cast<double>(gammas.size());
    return (bound_B + max_ratio) / T * delta_l1;
}

double coverage_bound(double bound_B, std::span<const double> gammas) {
    const std::vector<double> ones(gammas.size(), 1.0);
    return coverage_bound(bound_B, gammas, ones);
}

}  // namespace cdagger::conformal
