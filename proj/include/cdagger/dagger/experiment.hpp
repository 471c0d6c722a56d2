#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdagger/conformal/tracker.hpp"
#include "cdagger/dagger/gates.hpp"
#include "cdagger/dagger/learner.hpp"
#include "cdagger/sim/reach_env.hpp"
#include "cdagger/util/parallel.hpp"
#include "cdagger/util/rng.hpp"

namespace cdagger::dagger {

enum class Method { Conformal, Ensemble, Safe, Lazy };

const std::vector<std::string>& method_names();
/// Throws std::invalid_argument naming the valid methods.
Method method_from_name(const std::string& name);
std::string method_name(Method m);

using Vec4 = std::array<double, sim::kActionDim>;

struct StepLog {
    std::array<double, sim::kInputDim> x{};
    Vec4 robot_action{};
    Vec4 lower{};
    Vec4 upper{};
    Vec4 q_lo{};  // quantiles in force at this step (conformal only)
    Vec4 q_hi{};
    double width = 0.0;    // ||upper - lower||_2
    double p_robot = 0.0;
    double p_human = 0.0;
    double p_obs = 0.0;    // composed probability fed to the update
    bool query = false;         // robot-gated request fired
    bool intervention = false;  // human-gated intervention fired
    std::optional<Vec4> expert_action;  // a^h when observed
    Vec4 oracle_action{};               // expert action, always computed
    Vec4 err_lo{};  // oracle miscoverage per dimension, lower side
    Vec4 err_hi{};
    bool miscovered = false;
    Vec4 gamma_lo{};  // gamma_t per coordinate (conformal only)
    Vec4 gamma_hi{};
};

struct EpisodeLog {
    std::vector<StepLog> steps;
    bool success = false;

    double intervention_rate() const;
    double miscoverage_rate() const;
};

/// Learner state shared by all methods. Conformal, Safe and Lazy use one
/// member; Ensemble uses several.
struct Learner {
    std::vector<PolicyNet> members;
    std::optional<SafetyClassifier> classifier;

    sim::Action act(std::span<const double> x) const;
};

using PolicyFn = std::function<sim::Action(std::span<const double>)>;

struct Deviation {
    double value = 0.0;
    std::vector<Vec4> robot_actions;   // decision deviation: learner's actions
    std::vector<Vec4> expert_actions;  // ... and the expert's at the same states
    std::vector<sim::Vec3> robot_path;   // trajectory deviation: position traces
    std::vector<sim::Vec3> expert_path;
};

/// Learner rollout with the expert queried at each visited state; mean
/// ||a_r - a_h||_2.
Deviation decision_deviation(const PolicyFn& policy, const sim::ExpertPolicy& expert, const sim::Vec3& start,
                             const sim::WorldConfig& world);

/// Mean per-step distance between two independent rollouts from `start`.
/// The shorter trace is padded with its final position. Both traces include
/// the start.
Deviation trajectory_deviation(const PolicyFn& a, const PolicyFn& b, const sim::Vec3& start, const sim::Vec3& goal,
                               const sim::WorldConfig& world);

struct ExperimentConfig {
    Method method = Method::Conformal;
    sim::Scenario scenario;
    std::size_t episodes = 15;
    std::size_t executions = 2;
    GateConfig gates;
    BaselineConfig baselines;
    LearnerConfig learner;
    sim::WorldConfig world;
    Execution exec = Execution::Parallel;
    bool keep_logs = false;

    void validate() const;
};

/// Random state of one run, one named stream per use.
struct RunStreams {
    Rng robot_gate;
    Rng human_gate;
    explicit RunStreams(std::uint64_t seed) : robot_gate(seed, "gate_robot"), human_gate(seed, "gate_human") {}
};

/// Mutable per-method gate state carried through an episode.
struct GateState {
    std::optional<conformal::VectorIntervalTracker> tracker;
    std::optional<LazyGate> lazy;
};

/// One interactive execution of the task. The caller resets the tracker at
/// the start of each deployment episode.
EpisodeLog run_execution(Method method, const Learner& learner, const sim::ExpertPolicy& expert,
                         const sim::Vec3& start, GateState& gates, const ExperimentConfig& config,
                         RunStreams& streams);

/// Both executions of deployment episode `episode`, tracker reset first.
std::vector<EpisodeLog> run_deployment_episode(Method method, const Learner& learner,
                                               const sim::ExpertPolicy& expert, const sim::Vec3& start,
                                               GateState& gates, const ExperimentConfig& config,
                                               RunStreams& streams);

struct EpisodeMetrics {
    std::size_t episode = 0;
    double intervention_pct = 0.0;
    double miscoverage = 0.0;
    double decision_dev = 0.0;
    double trajectory_dev = 0.0;
    double mean_width = 0.0;
};

struct RunMetrics {
    Method method = Method::Conformal;
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> episodes;
    double initial_decision_dev = 0.0;
    double initial_trajectory_dev = 0.0;

    // Means over episodes (0 without episodes) and last-episode deviations
    // (the initial policy's without episodes).
    double miscoverage_rate() const;
    double intervention_pct() const;
    double decision_deviation() const;
    double trajectory_deviation() const;
};

struct RunResult {
    RunMetrics metrics;
    std::vector<std::vector<EpisodeLog>> logs;  // [episode][execution], when kept
};

/// Demonstrations and initial training for one seed.
Learner initial_learner(Method method, const ExperimentConfig& config, std::uint64_t seed,
                        const nn::Dataset& demos);

nn::Dataset initial_demos(const ExperimentConfig& config, std::uint64_t seed);

/// Full deployment loop for one seed. Throws std::runtime_error naming the
/// episode when training diverges.
RunResult run_full_experiment(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace cdagger::dagger
