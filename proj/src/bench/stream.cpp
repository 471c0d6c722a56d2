#include "cdagger/bench/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cdagger/util/rng.hpp"

namespace cdagger::bench {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    out.push_back(cell);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

void DatasetStream::validate() const {
    if (values.size() < 200) throw std::invalid_argument("stream '" + name + "' has fewer than 200 values");
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument("stream '" + name + "' contains non-finite values");
    }
}

DatasetStream load_csv_column(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path.string());
    const auto header = split_csv_line(line);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == column) col = i;
    }
    if (col == header.size()) throw std::runtime_error("column '" + column + "' not found in " + path.string());

    DatasetStream out;
    out.name = path.stem().string();
    out.source = "csv:" + path.string() + "#" + column;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (col >= cells.size()) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": missing column");
        const std::string cell = trim(cells[col]);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != cell.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": non-numeric value '" + cell + "'");
        }
        out.values.push_back(v);
    }
    return out;
}

const std::vector<std::string>& synthetic_generators() {
    static const std::vector<std::string> names{"ar1_drift", "sinusoid", "regime_switch"};
    return names;
}

DatasetStream synthetic_stream(const std::string& generator, std::uint64_t seed, std::size_t length) {
    Rng rng(seed, "synthetic:" + generator);
    DatasetStream out;
    out.name = generator;
    out.source = "synthetic:" + generator + ":" + std::to_string(seed) + ":" + std::to_string(length);
    out.values.reserve(length);

    if (generator == "ar1_drift") {
        // y_t = 0.7 y_{t-1} + 0.3 (10 + 0.01 t) + noise
        double y = 10.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double level = 10.0 + 0.01 * static_cast<double>(t);
            y = 0.7 * y + 0.3 * level + rng.normal(0.0, 1.0);
            out.values.push_back(y);
        }
    } else if (generator == "sinusoid") {
        for (std::size_t t = 0; t < length; ++t) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / 50.0;
            out.values.push_back(20.0 + 5.0 * std::sin(phase) + rng.normal(0.0, 0.5));
        }
    } else if (generator == "regime_switch") {
        // Price-like random walk whose drift and volatility jump between
        // regimes every 150-400 steps.
        constexpr double kVol[] = {0.5, 2.0, 6.0};
        constexpr double kDrift[] = {0.05, -0.1, 0.2};
        double y = 100.0;
        std::size_t regime = 0;
        std::size_t remaining = 150 + rng.index(251);
        for (std::size_t t = 0; t < length; ++t) {
            if (remaining-- == 0) {
                regime = (regime + 1 + rng.index(2)) % 3;
                remaining = 150 + rng.index(251);
            }
            y += kDrift[regime] + kVol[regime] * rng.normal(0.0, 1.0);
            out.values.push_back(y);
        }
    } else {
        throw std::invalid_argument("unknown synthetic generator '" + generator + "'");
    }
    return out;
}

}  // namespace cdagger::bench
