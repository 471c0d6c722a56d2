#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cdagger::forecast {

/// Autoregressive point forecaster fitted by least squares.
///
/// Lag convention: recent[0] is y_{t-1}, recent[1] is y_{t-2}, and so on.
class ArModel {
public:
    explicit ArModel(std::size_t order = 3, std::optional<std::size_t> fit_window = std::nullopt);

    /// Fits intercept and lag coefficients on `history` (oldest first),
    /// restricted to its last `fit_window` points when set. Rank-deficient
    /// designs are solved with a 1e-8 ridge term. Throws std::invalid_argument
    /// when fewer than order + 1 points are available.
    static ArModel fit(std::span<const double> history, std::size_t order = 3,
                       std::optional<std::size_t> fit_window = std::nullopt);

    std::size_t order() const noexcept { return order_; }
    bool fitted() const noexcept { return !coefficients_.empty(); }
    /// [intercept, lag_1, ..., lag_order]; empty before fit.
    const std::vector<double>& coefficients() const noexcept { return coefficients_; }
    double intercept() const;

    double predict(std::span<const double> recent) const;

    /// One-step forecast following the end of `history` (oldest first).
    double predict_next(std::span<const double> history) const;

private:
    std::size_t order_;
    std::optional<std::size_t> fit_window_;
    std::vector<double> coefficients_;
};

/// One-step-ahead forecasts for every index t >= warmup, refitting on
/// y[0..t) before each forecast. Entry i corresponds to t = warmup + i.
std::vector<double> rolling_forecast(std::span<const double> series, std::size_t warmup,
                                     std::size_t order = 3,
                                     std::optional<std::size_t> fit_window = std::nullopt);

}  // namespace cdagger::forecast
