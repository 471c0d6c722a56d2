#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cdagger::bench {

struct DatasetStream {
    std::string name;
    std::vector<double> values;
    std::string source;  // "csv:<path>#<column>" or "synthetic:<generator>:<seed>:<length>"

    /// Throws std::invalid_argument on non-finite values or length < 200.
    void validate() const;
};

/// Reads one numeric column, selected by header name, from a CSV file.
/// Throws std::runtime_error when the file or column is missing.
DatasetStream load_csv_column(const std::filesystem::path& path, const std::string& column);

/// Bundled generators: "ar1_drift", "sinusoid", "regime_switch".
DatasetStream synthetic_stream(const std::string& generator, std::uint64_t seed, std::size_t length = 2000);

const std::vector<std::string>& synthetic_generators();

}  // namespace cdagger::bench
