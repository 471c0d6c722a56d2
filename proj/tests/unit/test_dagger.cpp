#include <doctest.h>

#include <cmath>
#include <vector>

#include "cdagger/conformal/bounds.hpp"
#include "cdagger/dagger/experiment.hpp"
#include "cdagger/dagger/gates.hpp"

using namespace cdagger;
using namespace cdagger::dagger;

namespace {

ExperimentConfig small_config(Method m, const std::string& scenario = "stationary") {
    ExperimentConfig c;
    c.method = m;
    c.scenario = sim::Scenario::from_name(scenario);
    c.episodes = 3;
    c.scenario.shift_episode = 1;
    c.learner.policy_layers = {12, 16, 4};
    c.learner.classifier_layers = {12, 8, 1};
    c.learner.initial_iterations = 60;
    c.learner.finetune_iterations = 20;
    c.learner.demos.trajectories = 3;
    return c;
}

double l2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

GateState conformal_gates(const ExperimentConfig& c) {
    GateState g;
    g.tracker.emplace(sim::kActionDim, c.gates.q0, c.gates.alpha,
                      conformal::GammaSchedule::lookback(c.gates.lr, c.gates.lookback_k, true, c.gates.initial_scale));
    return g;
}

}  // namespace

TEST_CASE("compose observation probability") {
    CHECK(compose_obs_probability(0.2, 0.5) == doctest::Approx(0.6));
    CHECK(compose_obs_probability(0.0, 0.0) == 0.0);
    for (double p : {0.0, 0.3, 1.0}) CHECK(compose_obs_probability(1.0, p) == 1.0);
    CHECK_THROWS(compose_obs_probability(1.2, 0.0));
    CHECK_THROWS(compose_obs_probability(0.2, -0.1));
}

TEST_CASE("robot gate probability") {
    RobotGate g;
    CHECK(robot_gate_probability(g.tau, g) == 0.5);
    CHECK(robot_gate_probability(g.tau + 0.1, g) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))));
    CHECK(robot_gate_probability(g.tau + 0.1, g) == doctest::Approx(0.99995).epsilon(1e-5));
    CHECK(robot_gate_probability(1e6, g) == 1.0);
    CHECK(robot_gate_probability(-1e6, g) == 0.0);
    g.kind = RobotGate::Kind::HardThreshold;
    CHECK(robot_gate_probability(g.tau, g) == 0.0);
    CHECK(robot_gate_probability(g.tau + 1e-9, g) == 1.0);
}

TEST_CASE("ensemble gate and coverage") {
    BaselineConfig b;
    CHECK_FALSE(ensemble_gate(0.0, false, b));
    CHECK(ensemble_gate(0.07, false, b));
    CHECK(ensemble_gate(0.0, true, b));
    const std::vector<double> m{0.0, 0.0}, v{0.01, 0.01};
    CHECK(ensemble_covers(m, v, std::vector<double>{0.3, -0.3}, 3.0));
    CHECK_FALSE(ensemble_covers(m, v, std::vector<double>{0.31, 0.0}, 3.0));
    CHECK_FALSE(ensemble_covers(m, v, std::vector<double>{0.0, -0.31}, 3.0));
}

TEST_CASE("lazy gate") {
    LazyGate g(0.03, 0.1);
    CHECK(g.switch_back_threshold() == doctest::Approx(0.003));
    CHECK_FALSE(g.begin_step(false));
    CHECK(g.mode() == LazyGate::Mode::Autonomous);

    LazyGate h(0.03, 0.1);
    h.begin_step(true);
    h.begin_step(false);
    h.end_step(0.002);
    CHECK(h.mode() == LazyGate::Mode::Autonomous);
}

TEST_CASE("lazy gate follows a hand-stepped fixture") {
    struct Row {
        bool unsafe;
        double deviation;  // < 0: no expert action this step
        bool expert_in_control;
        LazyGate::Mode after;
    };
    using M = LazyGate::Mode;
    // threshold 0.1 * 0.03 = 0.003
    const Row rows[10] = {
        {false, -1, false, M::Autonomous},
        {true, 0.001, true, M::Intervention},   // just switched: no switch back this step
        {false, 0.01, true, M::Intervention},
        {true, 0.002, true, M::Autonomous},
        {false, -1, false, M::Autonomous},
        {true, 0.05, true, M::Intervention},
        {true, 0.0029, true, M::Autonomous},
        {true, 0.0, true, M::Intervention},
        {false, 0.003, true, M::Intervention},  // not strictly below
        {false, 0.0001, true, M::Autonomous},
    };
    LazyGate g(0.03, 0.1);
    for (const auto& r : rows) {
        CHECK(g.begin_step(r.unsafe) == r.expert_in_control);
        if (r.deviation >= 0) g.end_step(r.deviation);
        CHECK(g.mode() == r.after);
    }
}

TEST_CASE("method names") {
    for (const auto& n : method_names()) CHECK(method_name(method_from_name(n)) == n);
    try {
        method_from_name("thrifty");
        FAIL("expected a throw");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const auto& n : method_names()) CHECK(msg.find(n) != std::string::npos);
    }
}

TEST_CASE("deviation metrics") {
    sim::WorldConfig w;
    const sim::ExpertPolicy expert{w.g0, w.omega};
    const PolicyFn expert_fn = [&](std::span<const double> x) { return expert.act(sim::Vec3{x[0], x[1], x[2]}); };
    const PolicyFn zero = [](std::span<const double>) { return sim::Action{0, 0, 0, 0}; };
    const PolicyFn stay = [](std::span<const double> x) { return sim::Action{x[0], x[1], x[2], 1.0}; };

    CHECK(decision_deviation(expert_fn, expert, w.start, w).value == 0.0);
    CHECK(trajectory_deviation(expert_fn, expert_fn, w.start, w.g0, w).value == 0.0);
    CHECK(decision_deviation(zero, expert, w.start, w).value > 0.0);

    const auto d = decision_deviation(stay, expert, w.start, w);
    REQUIRE(d.robot_actions.size() == 100);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.robot_actions.size(); ++i) sum += l2(d.robot_actions[i], d.expert_actions[i]);
    CHECK(d.value == doctest::Approx(sum / 100.0).epsilon(1e-14));
    CHECK(d.value == doctest::Approx(0.01 * std::sqrt(1.0 + 1.0 + 0.64)));

    const auto ab = trajectory_deviation(stay, expert_fn, w.start, w.g0, w);
    const auto ba = trajectory_deviation(expert_fn, stay, w.start, w.g0, w);
    CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-14));
    // Brute force from the exported paths, holding the shorter trace.
    const std::size_t n = std::max(ab.robot_path.size(), ab.expert_path.size());
    double tot = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& a = ab.robot_path[std::min(t, ab.robot_path.size() - 1)];
        const auto& b = ab.expert_path[std::min(t, ab.expert_path.size() - 1)];
        tot += l2(a, b);
    }
    CHECK(ab.value == doctest::Approx(tot / n));
    CHECK(ab.robot_path.front() == w.start);
    CHECK(ab.robot_path.size() == 101);
}

TEST_CASE("episode with every gate closed") {
    auto c = small_config(Method::Conformal);
    c.gates.human_p = 0.0;
    c.gates.robot.kind = RobotGate::Kind::HardThreshold;
    c.gates.robot.tau = 1e9;
    const auto demos = initial_demos(c, 0);
    const auto learner = initial_learner(Method::Conformal, c, 0, demos);
    auto gates = conformal_gates(c);
    RunStreams streams(0);
    const sim::ExpertPolicy expert{c.world.g0, c.world.omega};
    const auto logs = run_deployment_episode(Method::Conformal, learner, expert, c.world.start, gates, c, streams);
    for (const auto& log : logs) {
        CHECK(log.intervention_rate() == 0.0);
        for (const auto& s : log.steps) {
            for (std::size_t d = 0; d < 4; ++d) {
                CHECK(s.q_lo[d] == c.gates.q0);
                CHECK(s.q_hi[d] == c.gates.q0);
            }
            CHECK_FALSE(s.expert_action.has_value());
        }
    }
    CHECK(gates.tracker->q_lo() == std::vector<double>(4, c.gates.q0));
}

TEST_CASE("full human supervision executes the expert trajectory") {
    auto c = small_config(Method::Conformal);
    c.gates.human_p = 1.0;
    const auto demos = initial_demos(c, 1);
    const auto learner = initial_learner(Method::Conformal, c, 1, demos);
    auto gates = conformal_gates(c);
    RunStreams streams(1);
    const sim::ExpertPolicy expert{c.world.g0, c.world.omega};
    const auto log = run_execution(Method::Conformal, learner, expert, c.world.start, gates, c, streams);

    sim::ReachEnv env(expert.goal, c.world);
    env.reset(c.world.start);
    std::size_t t = 0;
    while (!env.done()) {
        REQUIRE(t < log.steps.size());
        CHECK(log.steps[t].x == env.state().features());
        CHECK(log.steps[t].expert_action.has_value());
        CHECK(log.steps[t].p_obs == doctest::Approx(1.0).epsilon(1e-15));
        env.step(expert.act(env.state()));
        ++t;
    }
    CHECK(t == log.steps.size());
    CHECK(log.intervention_rate() == 1.0);
    CHECK(log.success);
}

TEST_CASE("human-only gating observes about human_p of the steps") {
    auto c = small_config(Method::Conformal);
    c.gates.human_p = 0.5;
    c.gates.robot.kind = RobotGate::Kind::HardThreshold;
    c.gates.robot.tau = 1e9;
    const auto demos = initial_demos(c, 2);
    const auto learner = initial_learner(Method::Conformal, c, 2, demos);
    auto gates = conformal_gates(c);
    RunStreams streams(2);
    const sim::ExpertPolicy expert{c.world.g0, c.world.omega};
    double seen = 0, total = 0;
    for (int e = 0; e < 10; ++e) {
        const auto log = run_execution(Method::Conformal, learner, expert, c.world.start, gates, c, streams);
        for (const auto& s : log.steps) {
            CHECK_FALSE(s.query);
            CHECK(s.p_obs == 0.5);
            seen += s.expert_action.has_value();
            total += 1;
        }
    }
    const double rate = seen / total;
    const double half_width = 4.0 * std::sqrt(0.25 / total);
    CHECK(std::fabs(rate - 0.5) < half_width);
}

TEST_CASE("conformal log: quantile moves follow the update sign and the bound holds") {
    auto c = small_config(Method::Conformal, "shift");
    c.keep_logs = true;
    const auto r = run_full_experiment(c, 3);
    REQUIRE(r.logs.size() == 3);
    for (const auto& episode : r.logs) {
        for (const auto& log : episode) {
            for (std::size_t t = 0; t + 1 < log.steps.size(); ++t) {
                const auto& a = log.steps[t];
                const auto& b = log.steps[t + 1];
                for (std::size_t d = 0; d < 4; ++d) {
                    if (!a.expert_action) {
                        CHECK(b.q_lo[d] == a.q_lo[d]);
                        CHECK(b.q_hi[d] == a.q_hi[d]);
                        continue;
                    }
                    // Covered: the side shrinks; miscovered: it grows.
                    if (a.err_lo[d] > 0) CHECK(b.q_lo[d] > a.q_lo[d]);
                    else CHECK(b.q_lo[d] < a.q_lo[d]);
                    if (a.err_hi[d] > 0) CHECK(b.q_hi[d] > a.q_hi[d]);
                    else CHECK(b.q_hi[d] < a.q_hi[d]);
                }
                // Width is the norm of q_lo + q_hi, so it follows when all sides agree.
                // Needs nonnegative per-dimension widths, or the norm is not monotone in them.
                bool all_cov = true, all_mis = true;
                for (std::size_t d = 0; d < 4; ++d) {
                    if (a.q_lo[d] + a.q_hi[d] < 0 || b.q_lo[d] + b.q_hi[d] < 0) all_cov = all_mis = false;
                    all_cov = all_cov && a.err_lo[d] == 0 && a.err_hi[d] == 0;
                    all_mis = all_mis && a.err_lo[d] > 0 && a.err_hi[d] > 0;
                }
                if (a.expert_action && all_cov) CHECK(b.width <= a.width + 1e-15);
                if (a.expert_action && all_mis) CHECK(b.width >= a.width - 1e-15);
            }
        }
        // Per-coordinate finite-sample bound over the episode (both executions).
        for (std::size_t d = 0; d < 4; ++d) {
            std::vector<double> g, p;
            double err = 0.0, B = c.gates.q0;
            for (const auto& log : episode) {
                for (const auto& s : log.steps) {
                    g.push_back(s.gamma_lo[d]);
                    p.push_back(s.p_obs);
                    err += s.err_lo[d];
                    B = std::max(B, std::fabs(s.robot_action[d] - s.oracle_action[d]));
                }
            }
            const double T = static_cast<double>(g.size());
            CHECK(std::fabs(err / T - c.gates.alpha) <= conformal::coverage_bound(2.0 * B, g, p));
        }
    }
}

TEST_CASE("full experiment: determinism, zero episodes, baselines") {
    for (Method m : {Method::Conformal, Method::Ensemble, Method::Safe, Method::Lazy}) {
        auto c = small_config(m, "drift");
        c.episodes = 12;
        c.learner.initial_iterations = 20;
        c.learner.finetune_iterations = 5;
        c.learner.demos.trajectories = 2;
        const auto a = run_full_experiment(c, 7);
        c.exec = Execution::Serial;
        const auto b = run_full_experiment(c, 7);
        REQUIRE(a.metrics.episodes.size() == 12);
        for (std::size_t i = 0; i < 12; ++i) {
            const auto& x = a.metrics.episodes[i];
            const auto& y = b.metrics.episodes[i];
            CHECK(x.intervention_pct == y.intervention_pct);
            CHECK(x.miscoverage == y.miscoverage);
            CHECK(x.decision_dev == y.decision_dev);
            CHECK(x.trajectory_dev == y.trajectory_dev);
            CHECK(x.intervention_pct >= 0.0);
            CHECK(x.intervention_pct <= 1.0);
            CHECK(x.miscoverage >= 0.0);
            CHECK(x.miscoverage <= 1.0);
        }
        CHECK(a.metrics.episodes[0].decision_dev == a.metrics.initial_decision_dev);
    }

    auto c = small_config(Method::Conformal);
    c.episodes = 0;
    const auto z = run_full_experiment(c, 1);
    CHECK(z.metrics.episodes.empty());
    CHECK(z.metrics.decision_deviation() == z.metrics.initial_decision_dev);
    CHECK(z.metrics.trajectory_deviation() == z.metrics.initial_trajectory_dev);
    CHECK(z.metrics.initial_decision_dev > 0.0);
    CHECK(z.metrics.intervention_pct() == 0.0);
}

TEST_CASE("baseline logs") {
    auto c = small_config(Method::Ensemble);
    c.keep_logs = true;
    c.episodes = 1;
    const auto r = run_full_experiment(c, 4);
    for (const auto& log : r.logs[0]) {
        for (const auto& s : log.steps) {
            const bool inside = [&] {
                for (std::size_t d = 0; d < 4; ++d)
                    if (s.oracle_action[d] < s.lower[d] || s.oracle_action[d] > s.upper[d]) return false;
                return true;
            }();
            CHECK(s.miscovered == !inside);
            if (s.expert_action) CHECK((s.query || s.intervention));
        }
    }
}

TEST_CASE("config validation") {
    ExperimentConfig c;
    c.executions = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.gates.human_p = 1.5;
    CHECK_THROWS(c.validate());
    c = {};
    c.baselines.ensemble_members = 1;
    CHECK_THROWS(c.validate());
    c = {};
    c.scenario = sim::Scenario::from_name("shift");
    c.episodes = 5;
    CHECK_THROWS(c.validate());
}
