#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "cdagger/io/config.hpp"
#include "cdagger/io/manifest.hpp"

namespace fs = std::filesystem;
using namespace cdagger;

namespace {

struct Run {
    int code;
    std::string output;
};

Run cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "cdagger_cli_test.log";
    const std::string cmd = std::string("\"") + CDAGGER_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cdagger_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("cli: unknown method exits 2 and lists the valid ones") {
    const auto dir = scratch("badmethod");
    write(dir / "c.jsonc", R"({"methods": ["thrifty"], "scenarios": ["stationary"], "seeds": [0]})");
    const auto r = cli("dagger --config " + (dir / "c.jsonc").string() + " --out " + (dir / "out").string());
    CHECK(r.code == 2);
    for (const char* m : {"conformal", "ensemble", "safe", "lazy"}) CHECK(r.output.find(m) != std::string::npos);
}

TEST_CASE("cli: missing dataset path exits 2 and names it") {
    const auto dir = scratch("missing");
    write(dir / "c.jsonc", R"({"datasets": [{"csv": "nowhere/prices.csv", "column": "Close"}]})");
    const auto r = cli("bench --config " + (dir / "c.jsonc").string() + " --out " + (dir / "out").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("nowhere/prices.csv") != std::string::npos);

    const auto r2 = cli("bench --config " + (dir / "absent.jsonc").string());
    CHECK(r2.code == 2);
    CHECK(r2.output.find("absent.jsonc") != std::string::npos);
}

TEST_CASE("cli: unknown config keys are rejected") {
    const auto dir = scratch("typo");
    write(dir / "c.jsonc", R"({"p_level": [0.5]})");
    const auto r = cli("bench --config " + (dir / "c.jsonc").string() + " --out " + (dir / "out").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("p_level") != std::string::npos);
}

TEST_CASE("cli: bench output layout and repeatability") {
    const auto dir = scratch("bench");
    write(dir / "c.jsonc", R"({
      // comments are allowed
      "datasets": [{"name": "rs", "generator": "regime_switch", "seed": 1, "length": 400}],
      "p_levels": [0.1, 0.5, 0.9], "learning_rates": [0.1], "seeds": [0, 1, 2, 3, 4]
    })");
    const auto a = cli("bench --config " + (dir / "c.jsonc").string() + " --out " + (dir / "a").string());
    const auto b = cli("bench --config " + (dir / "c.jsonc").string() + " --out " + (dir / "b").string() + " --jobs 1");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a" / "bench_results.csv") == slurp(dir / "b" / "bench_results.csv"));

    const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    CHECK(summary.size() == 3 * 2);  // p levels x variants
    for (const auto& e : summary) CHECK(e["seeds"] == 5);

    std::size_t traces = 0;
    for (const auto& f : fs::directory_iterator(dir / "a" / "traces")) {
        ++traces;
        CHECK(slurp(f.path()) == slurp(dir / "b" / "traces" / f.path().filename()));
    }
    CHECK(traces == 3 * 2 * 5);
    const auto first = slurp(*fs::directory_iterator(dir / "a" / "traces"));
    CHECK(first.rfind("t,y,yhat,lower,upper,obs,err", 0) == 0);

    const auto m = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(m["command"] == "bench");
    CHECK(m["config_hash"] == io::config_hash(m["config"]));
    CHECK(m["seeds"].size() == 5);
    CHECK(m.contains("build"));
    CHECK(m.contains("wall_clock_seconds"));

    // The manifest's config alone reproduces the run.
    write(dir / "from_manifest.json", m["config"].dump());
    const auto c = cli("bench --config " + (dir / "from_manifest.json").string() + " --out " + (dir / "c").string());
    REQUIRE(c.code == 0);
    CHECK(slurp(dir / "a" / "bench_results.csv") == slurp(dir / "c" / "bench_results.csv"));
}

TEST_CASE("cli: small dagger run") {
    const auto dir = scratch("dagger");
    write(dir / "c.jsonc", R"({"methods": ["conformal"], "scenarios": ["stationary"], "seeds": [0],
                              "episodes": 3, "step_logs": true})");
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = cli("dagger --config " + (dir / "c.jsonc").string() + " --out " + (dir / "out").string());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 120.0);
    const auto metrics = slurp(dir / "out" / "metrics.csv");
    CHECK(metrics.rfind("episode,method,scenario,seed,intervention_pct,miscoverage,decision_dev,trajectory_dev", 0) == 0);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 3);
    CHECK(fs::exists(dir / "out" / "summary.json"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));
    CHECK(fs::exists(dir / "out" / "steps"));
}

TEST_CASE("cli: verify and its mutation switch") {
    const auto ok = cli("verify");
    CHECK(ok.code == 0);
    CHECK(ok.output.find("FAIL") == std::string::npos);
    const auto bad = cli("verify --mutate sign-flip");
    CHECK(bad.code != 0);
    CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("config parsing") {
    const auto j = nlohmann::json::parse(R"({"methods": ["safe"], "gates": {"robot_gate": "hard", "tau": 0.1}})");
    const auto c = io::DaggerRunConfig::from_json(j);
    CHECK(c.methods == std::vector<std::string>{"safe"});
    CHECK(c.experiment.gates.robot.kind == dagger::RobotGate::Kind::HardThreshold);
    CHECK(c.experiment.gates.robot.tau == 0.1);
    // Round trip through the resolved form.
    const auto back = io::DaggerRunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(io::config_hash(back.to_json()) == io::config_hash(c.to_json()));
    CHECK(io::config_hash(c.to_json()).size() == 16);

    CHECK_THROWS_AS(io::DaggerRunConfig::from_json(nlohmann::json::parse(R"({"gates": {"tua": 1}})")), io::ConfigError);
    CHECK_THROWS_AS(io::DaggerRunConfig::from_json(nlohmann::json::parse(R"({"episodes": 3})")), io::ConfigError);
    CHECK_THROWS_AS(io::BenchRunConfig::from_json(nlohmann::json::parse(R"({"variants": ["px"]})")), io::ConfigError);

    for (const char* name : {"bench_synthetic.jsonc", "bench_csv_example.jsonc"}) {
        CHECK_NOTHROW(io::BenchRunConfig::from_json(io::read_json_file(fs::path(CDAGGER_SOURCE_DIR) / "configs" / name)));
    }
    for (const char* name : {"dagger_full.jsonc", "dagger_quick.jsonc"}) {
        CHECK_NOTHROW(io::DaggerRunConfig::from_json(io::read_json_file(fs::path(CDAGGER_SOURCE_DIR) / "configs" / name)));
    }
    // Bundled full config matches the library defaults.
    const auto full = io::DaggerRunConfig::from_json(
        io::read_json_file(fs::path(CDAGGER_SOURCE_DIR) / "configs" / "dagger_full.jsonc"));
    CHECK(full.to_json() == io::DaggerRunConfig{}.to_json());
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
    CHECK(io::format_double(0.5) == "0.5");
}
