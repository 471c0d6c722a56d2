#include "cdagger/io/manifest.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace cdagger::io {

nlohmann::json RunManifest::to_json() const {
    return {{"command", command},       {"argv", argv},
            {"config", config},         {"config_hash", config_hash},
            {"seeds", seeds},           {"build", build},
            {"wall_clock_seconds", wall_clock_seconds}, {"outputs", outputs}};
}

void RunManifest::write(const std::filesystem::path& dir) const {
    write_text(dir / "manifest.json", to_json().dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace cdagger::io
