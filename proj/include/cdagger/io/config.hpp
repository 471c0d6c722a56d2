#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdagger/bench/timeseries.hpp"
#include "cdagger/dagger/experiment.hpp"

namespace cdagger::io {

/// Config files are JSON with // and /* */ comments allowed. Unknown keys are
/// errors so that typos cannot silently fall back to defaults.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing input file (config or dataset). The CLI maps this to exit code 2.
class MissingPath : public std::runtime_error {
public:
    explicit MissingPath(const std::filesystem::path& path)
        : std::runtime_error("no such file: " + path.string()), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

nlohmann::json read_json_file(const std::filesystem::path& path);

struct DatasetSpec {
    std::string name;
    // Exactly one of: a CSV column, or a bundled generator.
    std::optional<std::filesystem::path> csv;
    std::string column;
    std::string generator;
    std::uint64_t seed = 0;
    std::size_t length = 2000;

    bench::DatasetStream load(const std::filesystem::path& base_dir) const;
};

struct BenchRunConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<double> p_levels{0.1};
    std::vector<double> learning_rates{1.0, 0.1, 0.01};
    std::vector<std::string> variants{"pd", "pi"};  // IQT-pd / IQT-pi step sizes
    bench::BenchConfig base;                        // seeds, alpha, lookback, warmup, ...
    std::filesystem::path base_dir;                 // relative dataset paths resolve here

    static BenchRunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;
};

struct DaggerRunConfig {
    std::vector<std::string> methods{"conformal", "ensemble", "safe", "lazy"};
    std::vector<std::string> scenarios{"stationary", "shift", "drift", "env_shift"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    bool step_logs = false;
    dagger::ExperimentConfig experiment;  // method and scenario are filled per run

    static DaggerRunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// 16 hex digits of FNV-1a over the canonical dump of `j`.
std::string config_hash(const nlohmann::json& j);

}  // namespace cdagger::io
