#pragma once

#include <span>

namespace cdagger::conformal {

/// Finite-horizon coverage gap bound for intermittent quantile tracking:
///
///   (B + max_t gamma_t / p_t) / T * ||Delta||_1,
///   Delta_1 = 1/gamma_1, Delta_t = 1/gamma_t - 1/gamma_{t-1}.
///
/// The bound controls the gap in expectation over the observation draws; a
/// single realization additionally carries martingale noise of order
/// sqrt(sum (1-p_t)/p_t) / T.
///
/// Throws std::invalid_argument on empty or mismatched input, non-positive
/// gamma, or p outside (0, 1].
double coverage_bound(double bound_B, std::span<const double> gammas, std::span<const double> ps);

/// Same bound for a fully observed run (p_t = 1), where it holds on every
/// realization.
double coverage_bound(double bound_B, std::span<const double> gammas);

struct Range {
    double lo;
    double hi;
    bool contains(double x, double tol = 0.0) const noexcept { return x >= lo - tol && x <= hi + tol; }
};

/// Range that q_t cannot leave when scores and q_1 lie in [0, B] and N is the
/// running max of gamma_t / p_t over observed steps.
inline Range quantile_range(double alpha, double bound_B, double max_step) noexcept {
    return {-alpha * max_step, bound_B + (1.0 - alpha) * max_step};
}

/// Range that alpha_t cannot leave under intermittent adaptive conformal
/// inference, with M the running minimum of p_t.
inline Range aci_alpha_range(double gamma, double min_p) noexcept {
    return {-gamma / min_p, 1.0 + gamma / min_p};
}

}  // namespace cdagger::conformal
