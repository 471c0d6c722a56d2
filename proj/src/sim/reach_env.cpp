#include "cdagger/sim/reach_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "cdagger/util/rng.hpp"

namespace cdagger::sim {

namespace {

Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
    return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

}  // namespace

Vec3 WorldConfig::g1a() const { return lerp(g0, g1, 1.0 / 3.0); }
Vec3 WorldConfig::g1b() const { return lerp(g0, g1, 2.0 / 3.0); }

EnvState::EnvState(const Vec3& start, double gripper) {
    positions_.fill(start);
    grippers_.fill(gripper);
}

std::array<double, kInputDim> EnvState::features() const {
    std::array<double, kInputDim> x{};
    for (std::size_t h = 0; h < kHistory; ++h) {
        x[4 * h + 0] = positions_[h][0];
        x[4 * h + 1] = positions_[h][1];
        x[4 * h + 2] = positions_[h][2];
        x[4 * h + 3] = grippers_[h];
    }
    return x;
}

void EnvState::advance(const Vec3& position, double gripper) {
    for (std::size_t h = kHistory - 1; h > 0; --h) {
        positions_[h] = positions_[h - 1];
        grippers_[h] = grippers_[h - 1];
    }
    positions_[0] = position;
    grippers_[0] = gripper;
    ++step_;
}

Action ExpertPolicy::act(const Vec3& position) const {
    double max_gap = 0.0;
    for (std::size_t d = 0; d < 3; ++d) max_gap = std::max(max_gap, std::fabs(goal[d] - position[d]));
    Action a{position[0], position[1], position[2], 1.0};
    if (max_gap == 0.0) return a;
    for (std::size_t d = 0; d < 3; ++d) a[d] += omega * (goal[d] - position[d]) / max_gap;
    return a;
}

ReachEnv::ReachEnv(Vec3 goal, const WorldConfig& world) : goal_(goal), world_(world) {}

const EnvState& ReachEnv::reset(const Vec3& start) {
    state_ = EnvState(start, 1.0);
    done_ = false;
    success_ = false;
    return state_;
}

double ReachEnv::distance_to_goal() const {
    double sq = 0.0;
    for (std::size_t d = 0; d < 3; ++d) sq += (state_.position()[d] - goal_[d]) * (state_.position()[d] - goal_[d]);
    return std::sqrt(sq);
}

bool ReachEnv::step(std::span<const double> action) {
    if (done_) throw std::logic_error("ReachEnv::step: episode already finished");
    if (action.size() != kActionDim) throw std::invalid_argument("ReachEnv::step: action must have 4 entries");
    state_.advance({action[0], action[1], action[2]}, action[3] >= 0.5 ? 1.0 : 0.0);
    success_ = distance_to_goal() <= world_.goal_tol;
    done_ = success_ || state_.step_index() >= world_.horizon;
    return done_;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"stationary", "shift", "drift", "env_shift"};
    return names;
}

Scenario Scenario::from_name(const std::string& name) {
    Scenario s;
    if (name == "stationary") {
        s.kind = ScenarioKind::Stationary;
    } else if (name == "shift") {
        s.kind = ScenarioKind::Shift;
    } else if (name == "drift") {
        s.kind = ScenarioKind::Drift;
    } else if (name == "env_shift") {
        s.kind = ScenarioKind::EnvShift;
    } else {
        throw std::invalid_argument("unknown scenario '" + name + "'");
    }
    return s;
}

std::string Scenario::name() const {
    switch (kind) {
        case ScenarioKind::Stationary: return "stationary";
        case ScenarioKind::Shift: return "shift";
        case ScenarioKind::Drift: return "drift";
        case ScenarioKind::EnvShift: return "env_shift";
    }
    return "unknown";
}

Vec3 Scenario::goal(std::size_t episode, const WorldConfig& world) const {
    switch (kind) {
        case ScenarioKind::Shift:
            return episode < shift_episode ? world.g0 : world.g1;
        case ScenarioKind::Drift:
            if (episode < drift_breakpoints[0]) return world.g0;
            if (episode < drift_breakpoints[1]) return world.g1a();
            if (episode < drift_breakpoints[2]) return world.g1b();
            return world.g1;
        case ScenarioKind::Stationary:
        case ScenarioKind::EnvShift:
            return world.g0;
    }
    return world.g0;
}

Vec3 Scenario::start(std::size_t, const WorldConfig& world) const {
    return kind == ScenarioKind::EnvShift ? world.env_shift_start : world.start;
}

void Scenario::validate(std::size_t episodes) const {
    if (kind == ScenarioKind::Shift && shift_episode >= episodes) {
        throw std::invalid_argument("scenario: shift episode must be below the episode count");
    }
    if (kind == ScenarioKind::Drift) {
        const auto& b = drift_breakpoints;
        if (!(b[0] < b[1] && b[1] < b[2])) throw std::invalid_argument("scenario: drift breakpoints must increase");
        if (b[2] >= episodes) throw std::invalid_argument("scenario: drift breakpoints must be below the episode count");
    }
}

nn::Dataset collect_demos(const ExpertPolicy& expert, const Vec3& start, const DemoConfig& config,
                          const WorldConfig& world) {
    Rng rng(config.seed, "demo_noise");
    std::vector<std::array<double, kInputDim>> xs;
    std::vector<Action> as;
    ReachEnv env(expert.goal, world);
    for (std::size_t n = 0; n < config.trajectories; ++n) {
        env.reset(start);
        while (!env.done()) {
            const auto& state = env.state();
            const Action label = expert.act(state);
            xs.push_back(state.features());
            as.push_back(label);
            Action executed = label;
            if (config.noise_std > 0.0 || config.noise_mean != (config.mode == DemoNoise::Multiplicative ? 1.0 : 0.0)) {
                if (config.mode == DemoNoise::Multiplicative) {
                    const double scale = rng.normal(config.noise_mean, config.noise_std);
                    for (std::size_t d = 0; d < 3; ++d) executed[d] = state.position()[d] + scale * (label[d] - state.position()[d]);
                } else {
                    for (std::size_t d = 0; d < 3; ++d) executed[d] += expert.omega * rng.normal(config.noise_mean, config.noise_std);
                }
            }
            env.step(executed);
        }
    }
    nn::Dataset data;
    data.inputs.resize(xs.size(), kInputDim);
    data.targets.resize(as.size(), kActionDim);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::copy(xs[i].begin(), xs[i].end(), data.inputs.row(i).begin());
        std::copy(as[i].begin(), as[i].end(), data.targets.row(i).begin());
    }
    return data;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "t";
    for (std::size_t i = 1; i <= kInputDim; ++i) out << ",x" << i;
    for (std::size_t i = 1; i <= kActionDim; ++i) out << ",a" << i;
    out << ",src\n" << std::setprecision(17);
    for (std::size_t t = 0; t < rows.size(); ++t) {
        out << t;
        for (double v : rows[t].x) out << ',' << v;
        for (double v : rows[t].action) out << ',' << v;
        out << ',' << (rows[t].human ? "human" : "robot") << '\n';
    }
}

}  // namespace cdagger::sim
