#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "cdagger/sim/reach_env.hpp"
#include "cdagger/util/rng.hpp"

using namespace cdagger;
using namespace cdagger::sim;

namespace {

double max_gap(const Vec3& a, const Vec3& b) {
    double m = 0.0;
    for (int d = 0; d < 3; ++d) m = std::max(m, std::fabs(a[d] - b[d]));
    return m;
}

}  // namespace

TEST_CASE("expert examples") {
    ExpertPolicy e{{1.0, 0.5, 0.25}, 0.01};
    auto a = e.act(Vec3{0, 0, 0});
    CHECK(a[0] == doctest::Approx(0.01));
    CHECK(a[1] == doctest::Approx(0.005));
    CHECK(a[2] == doctest::Approx(0.0025));
    CHECK(a[3] == 1.0);

    a = e.act(e.goal);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.5);
    CHECK(a[2] == 0.25);

    ExpertPolicy f{{1.0, 0.0, 0.0}, 0.01};
    a = f.act(Vec3{0.99, 0, 0});
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a[1] == 0.0);
}

TEST_CASE("env state history") {
    EnvState s({0.1, 0.2, 0.3});
    auto x = s.features();
    for (int h = 0; h < 3; ++h) {
        CHECK(x[4 * h] == 0.1);
        CHECK(x[4 * h + 3] == 1.0);
    }
    s.advance({0.4, 0.5, 0.6}, 0.0);
    x = s.features();
    CHECK(x[0] == 0.4);
    CHECK(x[3] == 0.0);
    CHECK(x[4] == 0.1);
    CHECK(s.step_index() == 1);
}

TEST_CASE("env step, success and horizon") {
    WorldConfig w;
    ReachEnv env(w.g0, w);
    env.reset(w.start);
    const std::vector<double> at_goal{w.g0[0], w.g0[1], w.g0[2], 1.0};
    CHECK(env.step(at_goal));
    CHECK(env.success());
    CHECK_THROWS(env.step(at_goal));

    env.reset(w.start);
    const std::vector<double> stay{w.start[0], w.start[1], w.start[2], 1.0};
    int steps = 0;
    while (!env.step(stay)) ++steps;
    CHECK(steps + 1 == 100);
    CHECK_FALSE(env.success());

    env.reset(w.start);
    const std::vector<double> short_action{0.0, 0.0};
    CHECK_THROWS(env.step(short_action));
}

TEST_CASE("expert reaches every goal within the horizon") {
    WorldConfig w;
    for (const Vec3& start : {w.start, w.env_shift_start}) {
        for (const Vec3& g : {w.g0, w.g1, w.g1a(), w.g1b()}) {
            ExpertPolicy e{g, w.omega};
            ReachEnv env(g, w);
            env.reset(start);
            double prev = max_gap(start, g);
            while (!env.done()) {
                const Vec3 before = env.state().position();
                const auto a = e.act(env.state());
                env.step(a);
                const Vec3& p = env.state().position();
                CHECK(max_gap(p, before) <= w.omega + 1e-12);
                const double gap = max_gap(p, g);
                CHECK(gap <= prev + 1e-12);
                prev = gap;
            }
            CHECK(env.success());
            CHECK(env.state().step_index() <= 100);
        }
    }
}

TEST_CASE("demos") {
    WorldConfig w;
    ExpertPolicy e{w.g0, w.omega};
    DemoConfig c;
    c.seed = 3;
    const auto a = collect_demos(e, w.start, c, w);
    const auto b = collect_demos(e, w.start, c, w);
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
    // ~10 trajectories of ~80 steps
    CHECK(a.size() > 10 * 40);
    CHECK(a.size() <= 10 * 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.targets(i, 3) == 1.0);
        // Labels are the clean expert action at the recorded state.
        const Vec3 pos{a.inputs(i, 0), a.inputs(i, 1), a.inputs(i, 2)};
        const auto lab = e.act(pos);
        for (int d = 0; d < 4; ++d) CHECK(a.targets(i, d) == lab[d]);
    }
    c.seed = 4;
    CHECK(collect_demos(e, w.start, c, w).inputs != a.inputs);

    // No noise: the next recorded position is the previous label.
    c.noise_std = 0.0;
    for (auto mode : {DemoNoise::Multiplicative, DemoNoise::Additive}) {
        c.mode = mode;
        c.noise_mean = mode == DemoNoise::Multiplicative ? 1.0 : 0.0;
        c.trajectories = 1;
        const auto d = collect_demos(e, w.start, c, w);
        for (std::size_t i = 1; i < d.size(); ++i) {
            for (int k = 0; k < 3; ++k) CHECK(d.inputs(i, k) == d.targets(i - 1, k));
        }
    }
}

TEST_CASE("scenario goals and starts") {
    WorldConfig w;
    auto st = Scenario::from_name("stationary");
    for (std::size_t i = 0; i < 15; ++i) CHECK(st.goal(i, w) == w.g0);
    auto sh = Scenario::from_name("shift");
    CHECK(sh.goal(4, w) == w.g0);
    CHECK(sh.goal(5, w) == w.g1);
    auto dr = Scenario::from_name("drift");
    CHECK(dr.goal(4, w) == w.g0);
    CHECK(dr.goal(5, w) == w.g1a());
    CHECK(dr.goal(8, w) == w.g1b());
    CHECK(dr.goal(9, w) == w.g1b());
    CHECK(dr.goal(11, w) == w.g1);
    auto es = Scenario::from_name("env_shift");
    CHECK(es.start(0, w) == w.env_shift_start);
    CHECK(es.goal(7, w) == w.g0);
    CHECK(st.start(3, w) == w.start);

    for (const auto& n : scenario_names()) CHECK(Scenario::from_name(n).name() == n);
    CHECK_THROWS(Scenario::from_name("sideways"));

    dr.drift_breakpoints = {5, 5, 11};
    CHECK_THROWS(dr.validate(15));
    dr.drift_breakpoints = {5, 8, 15};
    CHECK_THROWS(dr.validate(15));
    sh.shift_episode = 20;
    CHECK_THROWS(sh.validate(15));

    const Vec3 g1a = w.g1a();
    CHECK(g1a[0] == doctest::Approx(0.5 - 1.0 / 3.0));
}

TEST_CASE("trace csv") {
    std::vector<TraceRow> rows(2);
    rows[0].x.fill(0.25);
    rows[0].action = {0.1, 0.2, 0.3, 1.0};
    rows[0].human = true;
    rows[1].x.fill(-1.0);
    rows[1].action = {0.0, 0.0, 0.0, 0.0};
    const auto p = std::filesystem::temp_directory_path() / "cdagger_unit_trace.csv";
    write_trace_csv(p, rows);
    std::ifstream in(p);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(header == "t,x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,x11,x12,a1,a2,a3,a4,src");
    CHECK(l1.rfind("0,0.25,", 0) == 0);
    CHECK(l1.substr(l1.size() - 6) == ",human");
    CHECK(l2.substr(l2.size() - 6) == ",robot");
}
