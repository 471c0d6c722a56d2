#include "cdagger/dagger/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cdagger::dagger {

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sq);
}

std::vector<sim::Vec3> rollout(const PolicyFn& policy, const sim::Vec3& start, const sim::Vec3& goal,
                               const sim::WorldConfig& world) {
    sim::ReachEnv env(goal, world);
    env.reset(start);
    std::vector<sim::Vec3> path{env.state().position()};
    while (!env.done()) {
        const auto x = env.state().features();
        env.step(policy(x));
        path.push_back(env.state().position());
    }
    return path;
}

std::string stream_name(const char* what, std::size_t a, std::size_t b) {
    return std::string(what) + "_" + std::to_string(a) + "_" + std::to_string(b);
}

nn::TrainConfig train_config(const LearnerConfig& lc, std::size_t iterations, std::uint64_t seed, Execution exec) {
    nn::TrainConfig tc;
    tc.learning_rate = lc.learning_rate;
    tc.batch_size = lc.batch_size;
    tc.iterations = iterations;
    tc.seed = seed;
    tc.optimizer = lc.optimizer;
    tc.exec = exec;
    return tc;
}

double safety_s_for(Method m, const BaselineConfig& b) {
    switch (m) {
        case Method::Ensemble: return b.ensemble_safety_s;
        case Method::Safe: return b.safe_safety_s;
        case Method::Lazy: return b.lazy_safety_s;
        case Method::Conformal: break;
    }
    return 0.0;
}

void fit_classifier(Learner& learner, const nn::Dataset& pairs, const nn::TrainConfig& tc) {
    if (!learner.classifier) return;
    learner.classifier->fit(pairs, [&](std::span<const double> x) { return learner.act(x); }, tc);
}

}  // namespace

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"conformal", "ensemble", "safe", "lazy"};
    return names;
}

Method method_from_name(const std::string& name) {
    if (name == "conformal") return Method::Conformal;
    if (name == "ensemble") return Method::Ensemble;
    if (name == "safe") return Method::Safe;
    if (name == "lazy") return Method::Lazy;
    std::string valid;
    for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown method '" + name + "' (valid: " + valid + ")");
}

std::string method_name(Method m) { return method_names().at(static_cast<std::size_t>(m)); }

double EpisodeLog::intervention_rate() const {
    if (steps.empty()) return 0.0;
    const auto n = std::count_if(steps.begin(), steps.end(), [](const StepLog& s) { return s.expert_action.has_value(); });
    return static_cast<double>(n) / static_cast<double>(steps.size());
}

double EpisodeLog::miscoverage_rate() const {
    if (steps.empty()) return 0.0;
    const auto n = std::count_if(steps.begin(), steps.end(), [](const StepLog& s) { return s.miscovered; });
    return static_cast<double>(n) / static_cast<double>(steps.size());
}

sim::Action Learner::act(std::span<const double> x) const {
    if (members.size() == 1) return members.front().act(x);
    return action_stats(members, x).mean;
}

Deviation decision_deviation(const PolicyFn& policy, const sim::ExpertPolicy& expert, const sim::Vec3& start,
                             const sim::WorldConfig& world) {
    Deviation out;
    sim::ReachEnv env(expert.goal, world);
    env.reset(start);
    double total = 0.0;
    while (!env.done()) {
        const auto x = env.state().features();
        const sim::Action ar = policy(x);
        const sim::Action ah = expert.act(env.state());
        total += l2(ar, ah);
        out.robot_actions.push_back(ar);
        out.expert_actions.push_back(ah);
        env.step(ar);
    }
    out.value = out.robot_actions.empty() ? 0.0 : total / static_cast<double>(out.robot_actions.size());
    return out;
}

Deviation trajectory_deviation(const PolicyFn& a, const PolicyFn& b, const sim::Vec3& start, const sim::Vec3& goal,
                               const sim::WorldConfig& world) {
    Deviation out;
    out.robot_path = rollout(a, start, goal, world);
    out.expert_path = rollout(b, start, goal, world);
    const std::size_t n = std::max(out.robot_path.size(), out.expert_path.size());
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& pa = out.robot_path[std::min(t, out.robot_path.size() - 1)];
        const auto& pb = out.expert_path[std::min(t, out.expert_path.size() - 1)];
        total += l2(pa, pb);
    }
    out.value = total / static_cast<double>(n);
    return out;
}

void ExperimentConfig::validate() const {
    if (executions == 0) throw std::invalid_argument("executions per episode must be positive");
    gates.validate();
    baselines.validate();
    learner.validate();
    if (episodes > 0) scenario.validate(episodes);
}

EpisodeLog run_execution(Method method, const Learner& learner, const sim::ExpertPolicy& expert,
                         const sim::Vec3& start, GateState& gates, const ExperimentConfig& config,
                         RunStreams& streams) {
    const auto& gc = config.gates;
    const auto& bc = config.baselines;
    if (method == Method::Conformal && !gates.tracker) throw std::logic_error("run_execution: conformal needs a tracker");
    if (method == Method::Lazy) {
        if (!gates.lazy) throw std::logic_error("run_execution: lazy needs a mode machine");
        gates.lazy->reset();
    }
    if (method != Method::Conformal && !learner.classifier) {
        throw std::logic_error("run_execution: baseline needs a safety classifier");
    }

    EpisodeLog log;
    sim::ReachEnv env(expert.goal, config.world);
    env.reset(start);
    while (!env.done()) {
        StepLog s;
        s.x = env.state().features();
        s.oracle_action = expert.act(env.state());

        bool unsafe = false;
        if (learner.classifier) unsafe = learner.classifier->safe_probability(s.x) < bc.classifier_cutoff;

        switch (method) {
            case Method::Conformal: {
                s.robot_action = learner.members.front().act(s.x);
                const auto iv = gates.tracker->interval(s.robot_action);
                const auto ql = gates.tracker->q_lo(), qh = gates.tracker->q_hi();
                std::copy(iv.lower.begin(), iv.lower.end(), s.lower.begin());
                std::copy(iv.upper.begin(), iv.upper.end(), s.upper.begin());
                std::copy(ql.begin(), ql.end(), s.q_lo.begin());
                std::copy(qh.begin(), qh.end(), s.q_hi.begin());
                s.width = iv.width_norm();
                s.p_robot = robot_gate_probability(s.width, gc.robot);
                break;
            }
            case Method::Ensemble: {
                const auto st = action_stats(learner.members, s.x);
                s.robot_action = st.mean;
                for (std::size_t d = 0; d < sim::kActionDim; ++d) {
                    const double half = bc.sigma_multiplier * std::sqrt(st.variance[d]);
                    s.lower[d] = st.mean[d] - half;
                    s.upper[d] = st.mean[d] + half;
                }
                s.width = l2(s.upper, s.lower);
                s.p_robot = ensemble_gate(st.aggregate, unsafe, bc) ? 1.0 : 0.0;
                break;
            }
            case Method::Safe:
                s.robot_action = learner.members.front().act(s.x);
                s.lower = s.upper = s.robot_action;
                s.p_robot = unsafe ? 1.0 : 0.0;
                break;
            case Method::Lazy:
                s.robot_action = learner.members.front().act(s.x);
                s.lower = s.upper = s.robot_action;
                s.p_robot = gates.lazy->begin_step(unsafe) ? 1.0 : 0.0;
                break;
        }
        s.p_human = gc.human_p;
        s.p_obs = compose_obs_probability(s.p_human, s.p_robot);

        // Robot gate first, then the human gate, each from its own stream.
        s.query = streams.robot_gate.bernoulli(s.p_robot);
        s.intervention = streams.human_gate.bernoulli(s.p_human);

        // Oracle miscoverage, for metrics only.
        if (method == Method::Conformal || method == Method::Ensemble) {
            for (std::size_t d = 0; d < sim::kActionDim; ++d) {
                s.err_lo[d] = s.oracle_action[d] < s.lower[d] ? 1.0 : 0.0;
                s.err_hi[d] = s.oracle_action[d] > s.upper[d] ? 1.0 : 0.0;
                if (method == Method::Conformal) {
                    // Same test in score form, so s == q counts as covered.
                    s.err_lo[d] = conformal::coverage_error(s.robot_action[d] - s.oracle_action[d], s.q_lo[d]);
                    s.err_hi[d] = conformal::coverage_error(s.oracle_action[d] - s.robot_action[d], s.q_hi[d]);
                }
                s.miscovered = s.miscovered || s.err_lo[d] > 0.0 || s.err_hi[d] > 0.0;
            }
        } else {
            s.miscovered = l2(s.robot_action, s.oracle_action) > safety_s_for(method, bc);
            s.err_lo.fill(s.miscovered ? 1.0 : 0.0);
            s.err_hi = s.err_lo;
        }

        const bool observed = s.query || s.intervention;
        if (observed) s.expert_action = s.oracle_action;

        if (method == Method::Conformal && s.p_obs > 0.0) {
            conformal::VectorObservation ev = conformal::VectorObservation::hidden(s.p_obs);
            if (observed) {
                std::vector<double> lo(sim::kActionDim), hi(sim::kActionDim);
                for (std::size_t d = 0; d < sim::kActionDim; ++d) {
                    lo[d] = s.robot_action[d] - s.oracle_action[d];
                    hi[d] = s.oracle_action[d] - s.robot_action[d];
                }
                ev = conformal::VectorObservation::seen(s.p_obs, std::move(lo), std::move(hi));
            }
            const auto infos = gates.tracker->iqt_step(ev);
            for (std::size_t d = 0; d < sim::kActionDim; ++d) {
                s.gamma_lo[d] = infos[d].gamma;
                s.gamma_hi[d] = infos[sim::kActionDim + d].gamma;
            }
        }
        if (method == Method::Lazy && s.query) gates.lazy->end_step(l2(s.robot_action, s.oracle_action));

        env.step(observed ? s.oracle_action : s.robot_action);
        log.steps.push_back(s);
    }
    log.success = env.success();
    return log;
}

std::vector<EpisodeLog> run_deployment_episode(Method method, const Learner& learner,
                                               const sim::ExpertPolicy& expert, const sim::Vec3& start,
                                               GateState& gates, const ExperimentConfig& config,
                                               RunStreams& streams) {
    if (gates.tracker) gates.tracker->reset_quantiles(config.gates.q0);
    std::vector<EpisodeLog> out;
    for (std::size_t e = 0; e < config.executions; ++e) {
        out.push_back(run_execution(method, learner, expert, start, gates, config, streams));
    }
    return out;
}

double RunMetrics::miscoverage_rate() const {
    if (episodes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : episodes) s += e.miscoverage;
    return s / static_cast<double>(episodes.size());
}

double RunMetrics::intervention_pct() const {
    if (episodes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : episodes) s += e.intervention_pct;
    return s / static_cast<double>(episodes.size());
}

double RunMetrics::decision_deviation() const {
    return episodes.empty() ? initial_decision_dev : episodes.back().decision_dev;
}

double RunMetrics::trajectory_deviation() const {
    return episodes.empty() ? initial_trajectory_dev : episodes.back().trajectory_dev;
}

nn::Dataset initial_demos(const ExperimentConfig& config, std::uint64_t seed) {
    sim::DemoConfig dc = config.learner.demos;
    dc.seed = substream_seed(seed, "demos");
    const sim::Vec3 start = config.scenario.start(0, config.world);
    const sim::ExpertPolicy expert{config.scenario.goal(0, config.world), config.world.omega};
    return sim::collect_demos(expert, start, dc, config.world);
}

Learner initial_learner(Method method, const ExperimentConfig& config, std::uint64_t seed, const nn::Dataset& demos) {
    const auto& lc = config.learner;
    Learner learner;
    const std::size_t members = method == Method::Ensemble ? config.baselines.ensemble_members : 1;
    for (std::size_t j = 0; j < members; ++j) {
        nn::Mlp net(lc.policy_layers, nn::OutputHead::Linear, substream_seed(seed, stream_name("policy_init", j, 0)));
        PolicyNet policy(std::move(net), config.world.omega, lc.step_limit);
        try {
            policy.fit(demos, train_config(lc, lc.initial_iterations, substream_seed(seed, stream_name("policy_train", j, 0)),
                                           config.exec));
        } catch (const nn::TrainingDiverged& e) {
            throw std::runtime_error("initial policy training diverged (member " + std::to_string(j) + "): " + e.what());
        }
        learner.members.push_back(std::move(policy));
    }
    if (method != Method::Conformal) {
        nn::Mlp net(lc.classifier_layers, nn::OutputHead::Logistic, substream_seed(seed, "classifier_init"));
        learner.classifier.emplace(std::move(net), safety_s_for(method, config.baselines));
        try {
            fit_classifier(learner, demos,
                           train_config(lc, lc.initial_iterations, substream_seed(seed, "classifier_train"), config.exec));
        } catch (const nn::TrainingDiverged& e) {
            throw std::runtime_error(std::string("initial classifier training diverged: ") + e.what());
        }
    }
    return learner;
}

RunResult run_full_experiment(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    const auto& lc = config.learner;
    const Method method = config.method;

    const nn::Dataset demos = initial_demos(config, seed);
    Learner learner = initial_learner(method, config, seed, demos);

    nn::ReplayBuffer buffer(lc.buffer_capacity);
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto x = demos.inputs.row(i);
        const auto y = demos.targets.row(i);
        buffer.push({x.begin(), x.end()}, {y.begin(), y.end()});
    }

    GateState gates;
    if (method == Method::Conformal) {
        const auto schedule = conformal::GammaSchedule::lookback(config.gates.lr, config.gates.lookback_k, true,
                                                                 config.gates.initial_scale);
        gates.tracker.emplace(sim::kActionDim, config.gates.q0, config.gates.alpha, schedule);
    }
    if (method == Method::Lazy) gates.lazy.emplace(config.baselines.lazy_safety_s, config.baselines.switch_back_fraction);

    RunStreams streams(seed);
    RunResult result;
    result.metrics.method = method;
    result.metrics.scenario = config.scenario.name();
    result.metrics.seed = seed;

    const PolicyFn learner_fn = [&](std::span<const double> x) { return learner.act(x); };
    auto deviations = [&](std::size_t episode) {
        const sim::ExpertPolicy expert{config.scenario.goal(episode, config.world), config.world.omega};
        const sim::Vec3 start = config.scenario.start(episode, config.world);
        const PolicyFn expert_fn = [&](std::span<const double> x) { return expert.act(sim::Vec3{x[0], x[1], x[2]}); };
        return std::pair{decision_deviation(learner_fn, expert, start, config.world).value,
                         trajectory_deviation(learner_fn, expert_fn, start, expert.goal, config.world).value};
    };
    std::tie(result.metrics.initial_decision_dev, result.metrics.initial_trajectory_dev) = deviations(0);

    for (std::size_t i = 0; i < config.episodes; ++i) {
        const sim::ExpertPolicy expert{config.scenario.goal(i, config.world), config.world.omega};
        const sim::Vec3 start = config.scenario.start(i, config.world);

        EpisodeMetrics em;
        em.episode = i;
        if (i == 0) {
            em.decision_dev = result.metrics.initial_decision_dev;
            em.trajectory_dev = result.metrics.initial_trajectory_dev;
        } else {
            std::tie(em.decision_dev, em.trajectory_dev) = deviations(i);
        }

        auto logs = run_deployment_episode(method, learner, expert, start, gates, config, streams);
        std::size_t width_steps = 0;
        for (const auto& log : logs) {
            em.intervention_pct += log.intervention_rate();
            em.miscoverage += log.miscoverage_rate();
            for (const auto& s : log.steps) {
                em.mean_width += s.width;
                if (s.expert_action) {
                    buffer.push({s.x.begin(), s.x.end()}, {s.expert_action->begin(), s.expert_action->end()});
                }
            }
            width_steps += log.steps.size();
        }
        em.intervention_pct /= static_cast<double>(logs.size());
        em.miscoverage /= static_cast<double>(logs.size());
        if (width_steps > 0) em.mean_width /= static_cast<double>(width_steps);
        result.metrics.episodes.push_back(em);
        if (config.keep_logs) result.logs.push_back(std::move(logs));

        const nn::Dataset data = buffer.to_dataset();
        try {
            for (std::size_t j = 0; j < learner.members.size(); ++j) {
                learner.members[j].fit(data, train_config(lc, lc.finetune_iterations,
                                                          substream_seed(seed, stream_name("finetune", i, j)), config.exec));
            }
            fit_classifier(learner, data,
                           train_config(lc, lc.finetune_iterations, substream_seed(seed, stream_name("classifier", i, 0)),
                                        config.exec));
        } catch (const nn::TrainingDiverged& e) {
            throw std::runtime_error("training diverged after episode " + std::to_string(i) + " (" + method_name(method) +
                                     ", seed " + std::to_string(seed) + "): " + e.what());
        }
    }
    return result;
}

}  // namespace cdagger::dagger
