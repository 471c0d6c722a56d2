#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cdagger::io {

/// Written as manifest.json, one per output directory. Holds everything needed
/// to repeat the run: the command line, the resolved config and its hash,
/// seeds, and the build it came from.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::string build;  // git describe of the source tree at configure time
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;  // relative to the output directory

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip decimal representation, so CSVs are byte-stable.
std::string format_double(double v);

}  // namespace cdagger::io
