#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cdagger/conformal/aci.hpp"
#include "cdagger/conformal/bounds.hpp"
#include "cdagger/conformal/schedule.hpp"
#include "cdagger/conformal/scores.hpp"
#include "cdagger/conformal/tracker.hpp"
#include "cdagger/util/rng.hpp"

using namespace cdagger;
using namespace cdagger::conformal;

namespace {

// Straight transcription of the bound, kept apart from the library version.
double bound_oracle(double B, const std::vector<double>& g, const std::vector<double>& p) {
    double n = 0.0, l1 = 1.0 / g[0];
    for (std::size_t t = 0; t < g.size(); ++t) {
        n = std::max(n, g[t] / p[t]);
        if (t > 0) l1 += std::fabs(1.0 / g[t] - 1.0 / g[t - 1]);
    }
    return (B + n) / static_cast<double>(g.size()) * l1;
}

}  // namespace

TEST_CASE("signed residual examples") {
    auto r = score_signed_residual(5.0, 3.0);
    CHECK(r.lo == 2.0);
    CHECK(r.hi == -2.0);
    r = score_signed_residual(3.0, 3.0);
    CHECK(r.lo == 0.0);
    CHECK(r.hi == 0.0);
    r = score_signed_residual(1.5, 4.0);
    CHECK(r.lo == -2.5);
    CHECK(r.hi == 2.5);

    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto s = score_signed_residual(rng.uniform(-5, 5), rng.uniform(-5, 5));
        CHECK(s.lo == -s.hi);
    }
}

TEST_CASE("coverage error examples") {
    CHECK(coverage_error(2.0, 1.0) == 1);
    CHECK(coverage_error(1.0, 1.0) == 0);
    CHECK(coverage_error(-0.5, 0.0) == 0);
}

TEST_CASE("qt step arithmetic") {
    ScalarTracker a(1.0, 0.1, 1.0, GammaSchedule::constant(0.1));
    a.qt_step(1);
    CHECK(a.quantile() == doctest::Approx(1.09).epsilon(1e-15));
    ScalarTracker b(1.0, 0.1, 1.0, GammaSchedule::constant(0.1));
    b.qt_step(0);
    CHECK(b.quantile() == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("qt long run coverage within the bound") {
    // p = 1: the bound holds on every realization.
    const double gamma = 0.05, alpha = 0.1, B = 1.0;
    const std::size_t T = 10000;
    ScalarTracker tr(0.5, alpha, B, GammaSchedule::constant(gamma));
    Rng rng(3, "scores");
    double errs = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double s = rng.uniform() * rng.uniform();
        errs += tr.observe(s).err;
    }
    const std::vector<double> g(T, gamma), p(T, 1.0);
    const double bound = coverage_bound(B, g, p);
    CHECK(bound == doctest::Approx(bound_oracle(B, g, p)));
    CHECK(std::fabs(errs / T - alpha) <= bound);
    CHECK(1.0 - errs / T == doctest::Approx(0.9).epsilon(0.01));
}

TEST_CASE("iqt step examples") {
    ScalarTracker a(0.5, 0.1, 1.0, GammaSchedule::constant(0.1));
    const auto info = a.iqt_step(ObservationEvent::hidden(0.3));
    CHECK(a.quantile() == 0.5);
    CHECK(info.err == -1);
    CHECK(info.effective_step == 0.0);

    // err = 1 via a score above q.
    ScalarTracker b(1.0, 0.1, 1.0, GammaSchedule::constant(0.1, true));
    b.iqt_step(ObservationEvent::seen(0.5, 2.0));
    CHECK(b.quantile() == doctest::Approx(1.18).epsilon(1e-15));

    // Same event through the p-independent family: the division cancels.
    ScalarTracker c(1.0, 0.1, 1.0, GammaSchedule::constant(0.1, false));
    c.iqt_step(ObservationEvent::seen(0.5, 2.0));
    CHECK(c.quantile() == doctest::Approx(1.09).epsilon(1e-15));
}

TEST_CASE("iqt rejects bad events") {
    ScalarTracker a(0.5, 0.1, 1.0, GammaSchedule::constant(0.1));
    CHECK_THROWS_AS(a.iqt_step(ObservationEvent::hidden(0.0)), std::invalid_argument);
    CHECK_THROWS_AS(a.iqt_step(ObservationEvent::hidden(-0.2)), std::invalid_argument);
    CHECK_THROWS_AS(a.iqt_step(ObservationEvent::seen(1.5, 0.0)), std::invalid_argument);
    ObservationEvent bad{true, 0.5, std::nullopt};
    CHECK_THROWS_AS(a.iqt_step(bad), std::invalid_argument);
}

TEST_CASE("iqt at p = 1 matches qt bit for bit") {
    for (bool pd : {true, false}) {
        const auto sched = GammaSchedule::lookback(0.3, 20, pd);
        ScalarTracker iqt(0.0, 0.1, 1.0, sched);
        double q = 0.0;  // independent recurrence
        std::vector<double> hist;
        Rng rng(11, "ar");
        double y = 0.0;
        for (int t = 0; t < 2000; ++t) {
            y = 0.8 * y + rng.normal(0, 1);
            const double s = std::fabs(y);
            double b = 0.0;
            for (std::size_t i = hist.size() > 20 ? hist.size() - 20 : 0; i < hist.size(); ++i) b = std::max(b, hist[i]);
            if (b <= 0.0) b = 1.0;
            const double gamma = 0.3 * b;
            const int err = s > q ? 1 : 0;
            q = q + gamma * (err - 0.1);
            hist.push_back(s);
            iqt.iqt_step(ObservationEvent::seen(1.0, s));
            REQUIRE(iqt.quantile() == q);
        }
    }
}

TEST_CASE("pd and pi coincide at p = 1") {
    ScalarTracker a(0.2, 0.1, 1.0, GammaSchedule::lookback(0.5, 10, true));
    ScalarTracker b(0.2, 0.1, 1.0, GammaSchedule::lookback(0.5, 10, false));
    Rng rng(5);
    for (int t = 0; t < 500; ++t) {
        const double s = rng.uniform();
        a.observe(s);
        b.observe(s);
        REQUIRE(a.quantile() == b.quantile());
    }
}

TEST_CASE("gamma_t = p_t reduces to q + (err - alpha) obs") {
    const auto sched = GammaSchedule::constant(1.0, false);
    ScalarTracker tr(0.3, 0.1, 1.0, sched);
    Rng rng(9);
    double q = 0.3;
    for (int t = 0; t < 3; ++t) {
        const double p = rng.uniform(0.1, 1.0);
        CHECK(tr.current_gamma(p) == doctest::Approx(p));
        const double s = rng.uniform();
        const int err = s > q ? 1 : 0;
        tr.iqt_step(ObservationEvent::seen(p, s));
        q += err - 0.1;
        CHECK(tr.quantile() == doctest::Approx(q).epsilon(1e-14));
    }
    // Bound collapses to (B + 1)/T ||Delta||_1.
    std::vector<double> ps{0.2, 0.9, 0.5, 0.7};
    double l1 = 1.0 / ps[0];
    for (std::size_t t = 1; t < ps.size(); ++t) l1 += std::fabs(1.0 / ps[t] - 1.0 / ps[t - 1]);
    const double expected = (1.0 + 1.0) / 4.0 * l1;
    CHECK(coverage_bound(1.0, ps, ps) == doctest::Approx(expected));
}

TEST_CASE("lookback schedule") {
    auto s = GammaSchedule::lookback(0.5, 3, true);
    CHECK(s.scale() == 1.0);
    s.record(-4.0);
    s.record(0.0);
    CHECK(s.scale() == 4.0);
    s.record(1.0);
    s.record(2.0);  // -4 leaves the window
    CHECK(s.scale() == 2.0);
    CHECK(s.gamma(0.5) == 1.0);
    CHECK(s.effective_step(0.5) == 2.0);

    auto pi = GammaSchedule::lookback(0.5, 3, false);
    pi.record(2.0);
    CHECK(pi.gamma(0.5) == 0.5);
    CHECK(pi.effective_step(0.5) == 1.0);

    CHECK_THROWS(GammaSchedule::lookback(0.5, 0));
    CHECK_THROWS(GammaSchedule::constant(0.0));

    // Unobserved steps leave the history alone.
    ScalarTracker tr(0.0, 0.1, 1.0, GammaSchedule::lookback(0.5, 3));
    tr.iqt_step(ObservationEvent::hidden(0.5));
    CHECK(tr.schedule().history().empty());
    tr.iqt_step(ObservationEvent::seen(0.5, 0.7));
    CHECK(tr.schedule().history().size() == 1);
}

TEST_CASE("vector tracker examples") {
    VectorIntervalTracker v(2, 0.01, 0.1, GammaSchedule::constant(0.1));
    v.iqt_step(VectorObservation::hidden(0.4));
    CHECK(v.q_lo() == std::vector<double>{0.01, 0.01});
    CHECK(v.q_hi() == std::vector<double>{0.01, 0.01});

    // gamma / p = 0.1 with p = 1.
    VectorIntervalTracker w(1, 0.01, 0.1, GammaSchedule::constant(0.1));
    w.iqt_step(VectorObservation::seen(1.0, {0.05}, {-0.05}));
    CHECK(w.q_lo()[0] == doctest::Approx(0.1).epsilon(1e-14));
    // Covered side: 0.01 + 0.1 * (0 - 0.1) = 0.
    CHECK(std::fabs(w.q_hi()[0]) < 1e-15);

    CHECK_THROWS_AS(w.iqt_step(VectorObservation::seen(1.0, {0.1, 0.2}, {0.1, 0.2})), std::invalid_argument);
    const std::vector<double> bad{1.0, 2.0};
    CHECK_THROWS_AS(w.interval(bad), std::invalid_argument);
}

TEST_CASE("vector tracker calibrates per dimension") {
    const double alpha = 0.1;
    VectorIntervalTracker v(2, 0.0, alpha, GammaSchedule::constant(0.01));
    Rng rng(21, "labels"), obs(21, "obs");
    const std::size_t T = 2000;
    std::vector<double> err_side(4, 0.0);
    double joint = 0.0;
    const std::vector<double> a{0.0, 0.0};
    for (std::size_t t = 0; t < T; ++t) {
        const std::vector<double> y{rng.normal(0, 0.1), rng.normal(0, 0.1)};
        const auto iv = v.interval(a);
        joint += iv.contains(y) ? 1.0 : 0.0;
        std::vector<double> lo(2), hi(2);
        for (int d = 0; d < 2; ++d) {
            lo[d] = a[d] - y[d];
            hi[d] = y[d] - a[d];
            err_side[d] += lo[d] > v.q_lo()[d];
            err_side[2 + d] += hi[d] > v.q_hi()[d];
        }
        if (obs.bernoulli(0.5)) v.iqt_step(VectorObservation::seen(0.5, lo, hi));
        else v.iqt_step(VectorObservation::hidden(0.5));
    }
    for (double e : err_side) CHECK(std::fabs(e / T - alpha) < 0.06);
    // Four one-sided alpha errors; independent dims give (1 - 2 alpha)^2.
    CHECK(joint / T > 1.0 - 4 * alpha - 0.06);
    CHECK(joint / T < 1.0 - 2 * alpha + 0.06);
}

TEST_CASE("interval examples") {
    const std::vector<double> a{0.5}, lo{0.1}, hi{0.2};
    const auto iv = make_interval(a, lo, hi);
    CHECK(iv.lower[0] == doctest::Approx(0.4));
    CHECK(iv.upper[0] == doctest::Approx(0.7));

    const std::vector<double> b{1, 2}, z{0, 0};
    const auto id = make_interval(b, z, z);
    CHECK(id.lower == b);
    CHECK(id.upper == b);
    CHECK(id.width_norm() == 0.0);

    const std::vector<double> q{0.03, 0.04};
    CHECK(make_interval(z, q, q).width_norm() == doctest::Approx(0.1).epsilon(1e-14));
    CHECK_THROWS(make_interval(a, q, q));
}

TEST_CASE("coverage bound examples") {
    std::vector<double> g(100, 0.1), p1(100, 1.0), ph(100, 0.5);
    CHECK(coverage_bound(1.0, g, p1) == doctest::Approx(0.11).epsilon(1e-12));
    CHECK(coverage_bound(1.0, g, ph) == doctest::Approx(0.12).epsilon(1e-12));
    CHECK(coverage_bound(1.0, g) == coverage_bound(1.0, g, p1));

    const std::vector<double> empty;
    CHECK_THROWS_AS(coverage_bound(1.0, empty, empty), std::invalid_argument);
    CHECK_THROWS_AS(coverage_bound(1.0, g, std::vector<double>(99, 1.0)), std::invalid_argument);
    std::vector<double> bad = g;
    bad[3] = 0.0;
    CHECK_THROWS_AS(coverage_bound(1.0, bad, p1), std::invalid_argument);

    Rng rng(4);
    for (int run = 0; run < 20; ++run) {
        std::vector<double> gg(50), pp(50);
        for (int t = 0; t < 50; ++t) {
            gg[t] = rng.uniform(0.01, 1.0);
            pp[t] = rng.uniform(0.05, 1.0);
        }
        CHECK(coverage_bound(2.0, gg, pp) == doctest::Approx(bound_oracle(2.0, gg, pp)).epsilon(1e-12));
    }
}

TEST_CASE("quantile stays in its range on random streams") {
    Rng rng(13, "lemma");
    for (int run = 0; run < 200; ++run) {
        const double B = rng.uniform(0.5, 3.0);
        const double alpha = rng.uniform(0.02, 0.5);
        const bool lookback = rng.bernoulli(0.5);
        const auto sched = lookback ? GammaSchedule::lookback(rng.uniform(0.01, 1.0), 1 + rng.index(50), rng.bernoulli(0.5))
                                    : GammaSchedule::constant(rng.uniform(0.01, 1.0), rng.bernoulli(0.5));
        ScalarTracker tr(rng.uniform() * B, alpha, B, sched);
        for (int t = 0; t < 300; ++t) {
            const double p = rng.uniform(0.05, 1.0);
            if (rng.bernoulli(p)) tr.iqt_step(ObservationEvent::seen(p, rng.uniform() * B));
            else tr.iqt_step(ObservationEvent::hidden(p));
            REQUIRE(quantile_range(alpha, B, tr.max_effective_step()).contains(tr.quantile(), 1e-12));
        }
    }
}

TEST_CASE("weighted quantile examples") {
    const std::vector<WeightedScore> w1{{1, 1}, {2, 1}, {3, 1}};
    CHECK(weighted_empirical_quantile(w1, 1.0) == 3.0);
    const std::vector<WeightedScore> w2{{1, 0.5}, {2, 1.0}};
    CHECK(weighted_empirical_quantile(w2, 0.5) == 1.0);
    const std::vector<WeightedScore> w3{{1, 1}, {2, 1}};
    CHECK(weighted_empirical_quantile(w3, 1.5) == std::numeric_limits<double>::infinity());
    CHECK(weighted_empirical_quantile(w3, -0.1) == -std::numeric_limits<double>::infinity());
    const std::vector<WeightedScore> none;
    CHECK_THROWS_AS(weighted_empirical_quantile(none, 0.5), std::invalid_argument);
}

TEST_CASE("weighted quantile is monotone in level") {
    Rng rng(17);
    for (int run = 0; run < 100; ++run) {
        std::vector<WeightedScore> w(1 + rng.index(30));
        for (auto& e : w) e = {rng.normal(0, 1), rng.uniform(0.1, 1.0)};
        double prev = -std::numeric_limits<double>::infinity();
        for (double level = -0.1; level <= 1.2; level += 0.01) {
            const double q = weighted_empirical_quantile(w, level);
            REQUIRE(q >= prev);
            prev = q;
        }
    }
}

TEST_CASE("iaci examples") {
    AciTracker a(0.1, 0.01, 50);
    a.iaci_step(ObservationEvent::hidden(0.5));
    CHECK(a.alpha_t() == 0.1);
    CHECK(a.min_p() == 0.5);

    AciTracker b(0.1, 0.01, 50, 0.1);
    b.iaci_step_with_error(ObservationEvent::seen(0.5, 1.0), 1);
    CHECK(b.alpha_t() == doctest::Approx(0.082).epsilon(1e-14));
    CHECK(b.window().size() == 1);
    CHECK_THROWS_AS(b.iaci_step(ObservationEvent::hidden(0.0)), std::invalid_argument);
}

TEST_CASE("iaci alpha stays in range") {
    Rng rng(23, "iaci");
    for (int run = 0; run < 10; ++run) {
        const double gamma = rng.uniform(0.005, 0.1);
        AciTracker a(0.1, gamma, 50);
        for (int t = 0; t < 10000; ++t) {
            const double p = rng.uniform(0.1, 1.0);
            const double s = std::fabs(rng.normal(0, 1));
            if (rng.bernoulli(p)) a.iaci_step(ObservationEvent::seen(p, s));
            else a.iaci_step(ObservationEvent::hidden(p));
            REQUIRE(aci_alpha_range(gamma, a.min_p()).contains(a.alpha_t(), 1e-12));
        }
    }
}

TEST_CASE("tracker state record") {
    ScalarTracker tr(0.25, 0.1, 2.0, GammaSchedule::lookback(0.5, 7, false));
    tr.observe(0.4);
    const auto rec = tr.to_record("x.");
    CHECK(rec.at("x.q") == tr.quantile());
    CHECK(rec.at("x.alpha") == 0.1);
    CHECK(rec.at("x.bound_B") == 2.0);
    CHECK(rec.at("x.step_count") == 1.0);
    CHECK(rec.at("x.schedule.k") == 7.0);
    CHECK(rec.at("x.schedule.p_dependent") == 0.0);
    CHECK(rec.at("x.schedule.history_size") == 1.0);

    VectorIntervalTracker v(3, 0.01, 0.1, GammaSchedule::constant(0.1));
    const auto vr = v.to_record();
    CHECK(vr.at("dims") == 3.0);
    CHECK(vr.at("lo.2.q") == 0.01);
    CHECK(vr.at("hi.0.q") == 0.01);

    AciTracker a(0.1, 0.01, 5);
    CHECK(a.to_record().at("window_size") == 0.0);
}

TEST_CASE("reset keeps the lookback history") {
    VectorIntervalTracker v(1, 0.01, 0.1, GammaSchedule::lookback(0.6, 10));
    v.iqt_step(VectorObservation::seen(0.5, {0.2}, {-0.2}));
    v.reset_quantiles(0.01);
    CHECK(v.q_lo()[0] == 0.01);
    CHECK(v.lo(0).schedule().history().size() == 1);
    CHECK(v.lo(0).step_count() == 0);
}
