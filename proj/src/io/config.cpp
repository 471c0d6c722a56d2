#include "cdagger/io/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace cdagger::io {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(const char* key) const { return where_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

sim::Vec3 read_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read_vec3_field(Fields& f, const char* key, sim::Vec3& out) {
    if (const json* c = f.child(key)) out = read_vec3(*c, f.path(key));
}

json vec3_json(const sim::Vec3& v) { return json::array({v[0], v[1], v[2]}); }

template <class Fn>
void wrap(const std::string& where, Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingPath(path);
    std::ifstream in(path);
    if (!in) throw MissingPath(path);
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

bench::DatasetStream DatasetSpec::load(const std::filesystem::path& base_dir) const {
    if (csv) {
        const auto full = csv->is_absolute() ? *csv : base_dir / *csv;
        if (!std::filesystem::exists(full)) throw MissingPath(full);
        auto stream = bench::load_csv_column(full, column);
        stream.name = name;
        return stream;
    }
    auto stream = bench::synthetic_stream(generator, seed, length);
    stream.name = name;
    return stream;
}

BenchRunConfig BenchRunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    BenchRunConfig c;
    c.base_dir = base_dir;
    Fields f(j, "bench");
    if (const json* ds = f.child("datasets")) {
        if (!ds->is_array() || ds->empty()) throw ConfigError("bench.datasets: expected a non-empty array");
        for (std::size_t i = 0; i < ds->size(); ++i) {
            DatasetSpec d;
            Fields g((*ds)[i], "bench.datasets[" + std::to_string(i) + "]");
            g.read("name", d.name);
            std::string csv;
            g.read("csv", csv);
            if (!csv.empty()) d.csv = csv;
            g.read("column", d.column);
            g.read("generator", d.generator);
            g.read("seed", d.seed);
            g.read("length", d.length);
            g.finish();
            if (d.csv && !d.generator.empty()) throw ConfigError("bench.datasets: give either csv or generator, not both");
            if (!d.csv && d.generator.empty()) throw ConfigError("bench.datasets: need csv or generator");
            if (d.csv && d.column.empty()) throw ConfigError("bench.datasets: csv needs a column");
            if (d.name.empty()) d.name = d.csv ? d.csv->stem().string() : d.generator;
            c.datasets.push_back(std::move(d));
        }
    } else {
        c.datasets.push_back({"regime_switch", std::nullopt, "", "regime_switch", 0, 2000});
    }
    f.read("p_levels", c.p_levels);
    f.read("learning_rates", c.learning_rates);
    f.read("variants", c.variants);
    f.read("seeds", c.base.seeds);
    f.read("alpha", c.base.alpha);
    f.read("lookback_k", c.base.lookback_k);
    f.read("warmup", c.base.warmup);
    f.read("ar_order", c.base.ar_order);
    f.read("q0", c.base.q0);
    f.read("ma_window", c.base.ma_window);
    f.finish();

    if (c.p_levels.empty() || c.learning_rates.empty() || c.variants.empty()) {
        throw ConfigError("bench: p_levels, learning_rates and variants must be non-empty");
    }
    for (const auto& v : c.variants) {
        if (v != "pd" && v != "pi") throw ConfigError("bench.variants: unknown variant '" + v + "' (valid: pd, pi)");
    }
    for (double p : c.p_levels) {
        auto probe = c.base;
        probe.p = p;
        for (double lr : c.learning_rates) {
            probe.lr = lr;
            wrap("bench", [&] { probe.validate(); });
        }
    }
    return c;
}

json BenchRunConfig::to_json() const {
    json ds = json::array();
    for (const auto& d : datasets) {
        json e{{"name", d.name}};
        if (d.csv) {
            e["csv"] = d.csv->string();
            e["column"] = d.column;
        } else {
            e["generator"] = d.generator;
            e["seed"] = d.seed;
            e["length"] = d.length;
        }
        ds.push_back(e);
    }
    return {{"datasets", ds},
            {"p_levels", p_levels},
            {"learning_rates", learning_rates},
            {"variants", variants},
            {"seeds", base.seeds},
            {"alpha", base.alpha},
            {"lookback_k", base.lookback_k},
            {"warmup", base.warmup},
            {"ar_order", base.ar_order},
            {"q0", base.q0},
            {"ma_window", base.ma_window}};
}

DaggerRunConfig DaggerRunConfig::from_json(const json& j) {
    DaggerRunConfig c;
    auto& e = c.experiment;
    Fields f(j, "dagger");
    f.read("methods", c.methods);
    f.read("scenarios", c.scenarios);
    f.read("seeds", c.seeds);
    f.read("step_logs", c.step_logs);
    f.read("episodes", e.episodes);
    f.read("executions", e.executions);

    if (const json* g = f.child("gates")) {
        Fields h(*g, "dagger.gates");
        auto& gc = e.gates;
        std::string kind = "sigmoid";
        h.read("human_p", gc.human_p);
        h.read("robot_gate", kind);
        h.read("tau", gc.robot.tau);
        h.read("beta", gc.robot.beta);
        h.read("alpha", gc.alpha);
        h.read("lr", gc.lr);
        h.read("lookback_k", gc.lookback_k);
        h.read("q0", gc.q0);
        h.read("initial_scale", gc.initial_scale);
        h.finish();
        if (kind == "sigmoid") {
            gc.robot.kind = dagger::RobotGate::Kind::Sigmoid;
        } else if (kind == "hard") {
            gc.robot.kind = dagger::RobotGate::Kind::HardThreshold;
        } else {
            throw ConfigError("dagger.gates.robot_gate: expected 'sigmoid' or 'hard'");
        }
    }
    if (const json* b = f.child("baselines")) {
        Fields h(*b, "dagger.baselines");
        auto& bc = e.baselines;
        h.read("ensemble_members", bc.ensemble_members);
        h.read("variance_tau", bc.variance_tau);
        h.read("ensemble_safety_s", bc.ensemble_safety_s);
        h.read("safe_safety_s", bc.safe_safety_s);
        h.read("lazy_safety_s", bc.lazy_safety_s);
        h.read("switch_back_fraction", bc.switch_back_fraction);
        h.read("sigma_multiplier", bc.sigma_multiplier);
        h.read("classifier_cutoff", bc.classifier_cutoff);
        h.finish();
    }
    if (const json* l = f.child("learner")) {
        Fields h(*l, "dagger.learner");
        auto& lc = e.learner;
        std::string optimizer = "adam";
        h.read("policy_layers", lc.policy_layers);
        h.read("classifier_layers", lc.classifier_layers);
        h.read("learning_rate", lc.learning_rate);
        h.read("batch_size", lc.batch_size);
        h.read("initial_iterations", lc.initial_iterations);
        h.read("finetune_iterations", lc.finetune_iterations);
        h.read("buffer_capacity", lc.buffer_capacity);
        h.read("optimizer", optimizer);
        h.read("step_limit", lc.step_limit);
        if (optimizer == "adam") {
            lc.optimizer = nn::Optimizer::Adam;
        } else if (optimizer == "sgd") {
            lc.optimizer = nn::Optimizer::Sgd;
        } else {
            throw ConfigError("dagger.learner.optimizer: expected 'adam' or 'sgd'");
        }
        if (const json* d = h.child("demos")) {
            Fields k(*d, "dagger.learner.demos");
            std::string noise = "multiplicative";
            k.read("trajectories", lc.demos.trajectories);
            k.read("noise_mean", lc.demos.noise_mean);
            k.read("noise_std", lc.demos.noise_std);
            k.read("noise", noise);
            k.finish();
            if (noise == "multiplicative") {
                lc.demos.mode = sim::DemoNoise::Multiplicative;
            } else if (noise == "additive") {
                lc.demos.mode = sim::DemoNoise::Additive;
            } else {
                throw ConfigError("dagger.learner.demos.noise: expected 'multiplicative' or 'additive'");
            }
        }
        h.finish();
    }
    if (const json* w = f.child("world")) {
        Fields h(*w, "dagger.world");
        auto& wc = e.world;
        read_vec3_field(h, "start", wc.start);
        read_vec3_field(h, "env_shift_start", wc.env_shift_start);
        read_vec3_field(h, "g0", wc.g0);
        read_vec3_field(h, "g1", wc.g1);
        h.read("omega", wc.omega);
        h.read("goal_tol", wc.goal_tol);
        h.read("horizon", wc.horizon);
        h.finish();
    }
    if (const json* s = f.child("scenario")) {
        Fields h(*s, "dagger.scenario");
        h.read("shift_episode", e.scenario.shift_episode);
        h.read("drift_breakpoints", e.scenario.drift_breakpoints);
        h.finish();
    }
    f.finish();

    if (c.methods.empty() || c.scenarios.empty() || c.seeds.empty()) {
        throw ConfigError("dagger: methods, scenarios and seeds must be non-empty");
    }
    for (const auto& m : c.methods) wrap("dagger.methods", [&] { dagger::method_from_name(m); });
    for (const auto& s : c.scenarios) wrap("dagger.scenarios", [&] { sim::Scenario::from_name(s); });
    if (!(e.world.omega > 0.0) || !(e.world.goal_tol > 0.0) || e.world.horizon == 0) {
        throw ConfigError("dagger.world: omega, goal_tol and horizon must be positive");
    }
    for (const auto& s : c.scenarios) {
        auto probe = e;
        const auto kind = sim::Scenario::from_name(s).kind;
        probe.scenario.kind = kind;
        wrap("dagger", [&] { probe.validate(); });
    }
    c.experiment.keep_logs = c.step_logs;
    return c;
}

json DaggerRunConfig::to_json() const {
    const auto& e = experiment;
    const auto& gc = e.gates;
    const auto& bc = e.baselines;
    const auto& lc = e.learner;
    const auto& wc = e.world;
    return {
        {"methods", methods},
        {"scenarios", scenarios},
        {"seeds", seeds},
        {"step_logs", step_logs},
        {"episodes", e.episodes},
        {"executions", e.executions},
        {"gates",
         {{"human_p", gc.human_p},
          {"robot_gate", gc.robot.kind == dagger::RobotGate::Kind::Sigmoid ? "sigmoid" : "hard"},
          {"tau", gc.robot.tau},
          {"beta", gc.robot.beta},
          {"alpha", gc.alpha},
          {"lr", gc.lr},
          {"lookback_k", gc.lookback_k},
          {"q0", gc.q0},
          {"initial_scale", gc.initial_scale}}},
        {"baselines",
         {{"ensemble_members", bc.ensemble_members},
          {"variance_tau", bc.variance_tau},
          {"ensemble_safety_s", bc.ensemble_safety_s},
          {"safe_safety_s", bc.safe_safety_s},
          {"lazy_safety_s", bc.lazy_safety_s},
          {"switch_back_fraction", bc.switch_back_fraction},
          {"sigma_multiplier", bc.sigma_multiplier},
          {"classifier_cutoff", bc.classifier_cutoff}}},
        {"learner",
         {{"policy_layers", lc.policy_layers},
          {"classifier_layers", lc.classifier_layers},
          {"learning_rate", lc.learning_rate},
          {"batch_size", lc.batch_size},
          {"initial_iterations", lc.initial_iterations},
          {"finetune_iterations", lc.finetune_iterations},
          {"buffer_capacity", lc.buffer_capacity},
          {"optimizer", lc.optimizer == nn::Optimizer::Adam ? "adam" : "sgd"},
          {"step_limit", lc.step_limit},
          {"demos",
           {{"trajectories", lc.demos.trajectories},
            {"noise_mean", lc.demos.noise_mean},
            {"noise_std", lc.demos.noise_std},
            {"noise", lc.demos.mode == sim::DemoNoise::Multiplicative ? "multiplicative" : "additive"}}}}},
        {"world",
         {{"start", vec3_json(wc.start)},
          {"env_shift_start", vec3_json(wc.env_shift_start)},
          {"g0", vec3_json(wc.g0)},
          {"g1", vec3_json(wc.g1)},
          {"omega", wc.omega},
          {"goal_tol", wc.goal_tol},
          {"horizon", wc.horizon}}},
        {"scenario",
         {{"shift_episode", e.scenario.shift_episode}, {"drift_breakpoints", e.scenario.drift_breakpoints}}},
    };
}

std::string config_hash(const json& j) {
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

}  // namespace cdagger::io
