#include "cdagger/conformal/aci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cdagger::conformal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double weighted_empirical_quantile(std::span<const WeightedScore> window, double level) {
    if (level <= 0.0) return -kInf;
    if (level > 1.0) return kInf;
    if (window.empty()) throw std::invalid_argument("weighted_empirical_quantile: empty window");

    std::vector<WeightedScore> sorted(window.begin(), window.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const WeightedScore& a, const WeightedScore& b) { return a.score < b.score; });

    const double n = static_cast<double>(sorted.size());
    // Tolerates the rounding of summing n terms of 1/n.
    const double target = level - 1e-12;
    double mass = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        mass += 1.0 / (sorted[i].p * n);
        // Ties: the infimum is reached only after every copy of a score counts.
        if (i + 1 < sorted.size() && sorted[i + 1].score == sorted[i].score) continue;
        if (mass >= target) return sorted[i].score;
    }
    return kInf;
}

AciTracker::AciTracker(double target_alpha, double gamma, std::size_t lookback_k, std::optional<double> alpha0)
    : alpha_t_(alpha0.value_or(target_alpha)), gamma_(gamma), target_(target_alpha), k_(lookback_k) {
    if (!(target_alpha > 0.0 && target_alpha < 1.0)) throw std::invalid_argument("AciTracker: target alpha must lie in (0, 1)");
    if (!(gamma > 0.0)) throw std::invalid_argument("AciTracker: gamma must be > 0");
    if (lookback_k == 0) throw std::invalid_argument("AciTracker: lookback must be >= 1");
    if (!(alpha_t_ >= 0.0 && alpha_t_ <= 1.0)) throw std::invalid_argument("AciTracker: alpha_1 must lie in [0, 1]");
}

double AciTracker::radius() const {
    const double level = 1.0 - alpha_t_;
    if (window_.empty() && level > 0.0 && level <= 1.0) return kInf;
    const std::vector<WeightedScore> w(window_.begin(), window_.end());
    return weighted_empirical_quantile(w, level);
}

int AciTracker::error(double score) const { return score > radius() ? 1 : 0; }

void AciTracker::push(double score, double p) {
    window_.push_back({score, p});
    while (window_.size() > k_) window_.pop_front();
}

int AciTracker::iaci_step(const ObservationEvent& event) {
    event.validate();
    min_p_ = std::min(min_p_, event.p);
    if (!event.observed) return -1;
    const int err = error(*event.score);
    alpha_t_ += gamma_ / event.p * (target_ - static_cast<double>(err));
    push(*event.score, event.p);
    return err;
}

void AciTracker::iaci_step_with_error(const ObservationEvent& event, int err) {
    event.validate();
    min_p_ = std::min(min_p_, event.p);
    if (!event.observed) return;
    alpha_t_ += gamma_ / event.p * (target_ - static_cast<double>(err));
    push(*event.score, event.p);
}

std::map<std::string, double> AciTracker::to_record() const {
    return {{"alpha_t", alpha_t_},
            {"gamma", gamma_},
            {"target_alpha", target_},
            {"lookback_k", static_cast<double>(k_)},
            {"min_p", min_p_},
            {"window_size", static_cast<double>(window_.size())}};
}

}  // namespace cdagger::conformal
