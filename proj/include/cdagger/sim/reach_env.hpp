#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdagger/nn/train.hpp"

namespace cdagger::sim {

using Vec3 = std::array<double, 3>;
using Action = std::array<double, 4>;  // next xyz position, gripper

inline constexpr std::size_t kHistory = 3;
inline constexpr std::size_t kInputDim = 12;
inline constexpr std::size_t kActionDim = 4;

/// Workspace geometry and task constants. Defaults are the artifact's
/// choices; every result file records the values actually used.
struct WorldConfig {
    Vec3 start{0.0, 0.0, 0.5};
    Vec3 env_shift_start{0.3, -0.3, 0.5};
    Vec3 g0{0.5, 0.5, 0.1};
    Vec3 g1{-0.5, 0.5, 0.1};
    double omega = 0.01;      // expert step cap per coordinate
    double goal_tol = 0.02;   // success radius around the active goal
    std::size_t horizon = 100;

    /// Goals one third and two thirds of the way from g0 to g1.
    Vec3 g1a() const;
    Vec3 g1b() const;
};

/// Three most recent (position, gripper) samples, most recent first.
class EnvState {
public:
    EnvState() = default;
    explicit EnvState(const Vec3& start, double gripper = 1.0);

    const Vec3& position() const noexcept { return positions_[0]; }
    double gripper() const noexcept { return grippers_[0]; }
    std::size_t step_index() const noexcept { return step_; }

    /// Flattened policy input: [pos_t, grip_t, pos_{t-1}, grip_{t-1}, pos_{t-2}, grip_{t-2}].
    std::array<double, kInputDim> features() const;

    void advance(const Vec3& position, double gripper);

private:
    std::array<Vec3, kHistory> positions_{};
    std::array<double, kHistory> grippers_{};
    std::size_t step_ = 0;
};

struct ExpertPolicy {
    Vec3 goal;
    double omega = 0.01;

    /// pos + omega * (goal - pos) / max_d |goal - pos|, gripper closed. At the
    /// goal itself the step is zero.
    Action act(const Vec3& position) const;
    Action act(const EnvState& state) const { return act(state.position()); }
};

class ReachEnv {
public:
    ReachEnv(Vec3 goal, const WorldConfig& world = {});

    const EnvState& reset(const Vec3& start);
    /// Moves to the action's xyz; the gripper state is the action's gripper
    /// rounded to {0, 1}. Returns true once the episode is over.
    bool step(std::span<const double> action);

    const EnvState& state() const noexcept { return state_; }
    const Vec3& goal() const noexcept { return goal_; }
    bool done() const noexcept { return done_; }
    bool success() const noexcept { return success_; }
    double distance_to_goal() const;

private:
    Vec3 goal_;
    WorldConfig world_;
    EnvState state_;
    bool done_ = false;
    bool success_ = false;
};

enum class ScenarioKind { Stationary, Shift, Drift, EnvShift };

struct Scenario {
    ScenarioKind kind = ScenarioKind::Stationary;
    std::size_t shift_episode = 5;
    std::array<std::size_t, 3> drift_breakpoints{5, 8, 11};

    static Scenario from_name(const std::string& name);
    std::string name() const;

    /// Expert goal during deployment episode i.
    Vec3 goal(std::size_t episode, const WorldConfig& world) const;
    /// Robot start during deployment episode i.
    Vec3 start(std::size_t episode, const WorldConfig& world) const;

    /// Throws std::invalid_argument when breakpoints are not strictly
    /// increasing or not below the episode count.
    void validate(std::size_t episodes) const;
};

const std::vector<std::string>& scenario_names();

enum class DemoNoise { Multiplicative, Additive };

struct DemoConfig {
    std::size_t trajectories = 10;
    double noise_mean = 1.0;
    double noise_std = 0.5;
    DemoNoise mode = DemoNoise::Multiplicative;
    std::uint64_t seed = 0;
};

/// Expert rollouts from `start` with noisy execution. Labels are the clean
/// expert actions at the visited states. Multiplicative noise scales the
/// expert step by one N(mean, std) draw per step; additive noise adds
/// omega * N(mean, std) to each coordinate.
nn::Dataset collect_demos(const ExpertPolicy& expert, const Vec3& start, const DemoConfig& config,
                          const WorldConfig& world = {});

/// One row of an exported trace.
struct TraceRow {
    std::array<double, kInputDim> x;
    Action action;
    bool human;  // action came from the expert
};

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows);

}  // namespace cdagger::sim
