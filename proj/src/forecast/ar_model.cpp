#include "cdagger/forecast/ar_model.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace cdagger::forecast {

namespace {
constexpr double kRidge = 1e-8;
}

ArModel::ArModel(std::size_t order, std::optional<std::size_t> fit_window)
    : order_(order), fit_window_(fit_window) {
    if (order == 0) throw std::invalid_argument("ArModel: order must be >= 1");
    if (fit_window && *fit_window < order + 1) throw std::invalid_argument("ArModel: fit window shorter than order + 1");
}

ArModel ArModel::fit(std::span<const double> history, std::size_t order, std::optional<std::size_t> fit_window) {
    ArModel model(order, fit_window);
    if (fit_window && history.size() > *fit_window) history = history.last(*fit_window);
    if (history.size() < order + 1) throw std::invalid_argument("ArModel::fit: insufficient history");

    const auto rows = static_cast<Eigen::Index>(history.size() - order);
    const auto cols = static_cast<Eigen::Index>(order + 1);
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) + order;
        X(r, 0) = 1.0;
        for (std::size_t lag = 1; lag <= order; ++lag) X(r, static_cast<Eigen::Index>(lag)) = history[t - lag];
        y(r) = history[t];
    }

    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == cols) {
        beta = qr.solve(y);
    } else {
        Eigen::MatrixXd gram = X.transpose() * X;
        gram.diagonal().array() += kRidge;
        beta = gram.ldlt().solve(X.transpose() * y);
    }
    model.coefficients_.assign(beta.data(), beta.data() + beta.size());
    return model;
}

double ArModel::intercept() const {
    if (!fitted()) throw std::logic_error("ArModel: not fitted");
    return coefficients_[0];
}

double ArModel::predict(std::span<const double> recent) const {
    if (!fitted()) throw std::logic_error("ArModel: not fitted");
    if (recent.size() != order_) throw std::invalid_argument("ArModel::predict: expected `order` lags");
    double out = coefficients_[0];
    for (std::size_t i = 0; i < order_; ++i) out += coefficients_[i + 1] * recent[i];
    return out;
}

double ArModel::predict_next(std::span<const double> history) const {
    if (history.size() < order_) throw std::invalid_argument("ArModel::predict_next: history shorter than order");
    std::vector<double> recent(order_);
    for (std::size_t i = 0; i < order_; ++i) recent[i] = history[history.size() - 1 - i];
    return predict(recent);
}

std::vector<double> rolling_forecast(std::span<const double> series, std::size_t warmup, std::size_t order,
                                     std::optional<std::size_t> fit_window) {
    if (warmup < order + 1) throw std::invalid_argument("rolling_forecast: warmup shorter than order + 1");
    if (series.size() <= warmup) throw std::invalid_argument("rolling_forecast: series not longer than warmup");
    std::vector<double> out;
    out.reserve(series.size() - warmup);
    for (std::size_t t = warmup; t < series.size(); ++t) {
        const auto past = series.first(t);
        out.push_back(ArModel::fit(past, order, fit_window).predict_next(past));
    }
    return out;
}

}  // namespace cdagger::forecast
