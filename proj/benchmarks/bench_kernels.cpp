// Serial reference vs parallel kernels: GEMM at the policy network's layer
// shapes, one training step, and the per-seed time-series benchmark.
//
//   bench_kernels [--reps N] [--threads N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>

#include "cdagger/bench/stream.hpp"
#include "cdagger/bench/timeseries.hpp"
#include "cdagger/nn/kernels.hpp"
#include "cdagger/nn/mlp.hpp"
#include "cdagger/nn/train.hpp"
#include "cdagger/util/parallel.hpp"
#include "cdagger/util/rng.hpp"

using namespace cdagger;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

nn::Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    nn::Matrix m(r, c);
    for (double& v : m.flat()) v = rng.uniform(-1.0, 1.0);
    return m;
}

double max_abs_diff(const nn::Matrix& a, const nn::Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
    return d;
}

void row(const std::string& name, double serial, double parallel, double diff) {
    std::printf("%-34s %10.3f %10.3f %7.2fx   max|diff| %.1e\n", name.c_str(), serial, parallel, serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 20;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (!std::strcmp(argv[i], "--reps")) reps = std::atoi(argv[i + 1]);
        if (!std::strcmp(argv[i], "--threads")) set_thread_count(std::atoi(argv[i + 1]));
    }
    std::printf("threads: %d, reps: %d\n\n", thread_count(), reps);
    std::printf("%-34s %10s %10s %8s\n", "kernel", "serial ms", "parallel ms", "speedup");

    Rng rng(7);
    // Forward GEMMs of a batch of 32 through the widest policy layers.
    const std::size_t shapes[][3] = {{32, 128, 472}, {32, 472, 512}, {32, 512, 256}, {256, 512, 472}};
    for (const auto& s : shapes) {
        const auto A = random_matrix(s[0], s[1], rng);
        const auto B = random_matrix(s[1], s[2], rng);
        nn::Matrix cs, cp;
        const double ts = time_ms(reps, [&] { nn::kernels::gemm_nn(Execution::Serial, A, B, cs, false); });
        const double tp = time_ms(reps, [&] { nn::kernels::gemm_nn(Execution::Parallel, A, B, cp, false); });
        row("gemm_nn " + std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]), ts, tp,
            max_abs_diff(cs, cp));
    }
    {
        // Weight gradient shape: X^T dY.
        const auto X = random_matrix(32, 472, rng);
        const auto D = random_matrix(32, 512, rng);
        nn::Matrix cs, cp;
        const double ts = time_ms(reps, [&] { nn::kernels::gemm_tn(Execution::Serial, X, D, cs, false); });
        const double tp = time_ms(reps, [&] { nn::kernels::gemm_tn(Execution::Parallel, X, D, cp, false); });
        row("gemm_tn 472x32x512", ts, tp, max_abs_diff(cs, cp));
    }

    const nn::Mlp net({12, 64, 128, 472, 512, 256, 64, 42, 4}, nn::OutputHead::Linear, 1);
    const auto X = random_matrix(32, 12, rng);
    const auto Y = random_matrix(32, 4, rng);
    {
        nn::Gradients gs, gp;
        double ls = 0.0, lp = 0.0;
        const double ts = time_ms(reps, [&] { ls = nn::loss_and_gradient(net, X, Y, gs, Execution::Serial); });
        const double tp = time_ms(reps, [&] { lp = nn::loss_and_gradient(net, X, Y, gp, Execution::Parallel); });
        row("policy loss+gradient, batch 32", ts, tp, std::fabs(ls - lp));
    }

    {
        const auto prepared = bench::prepare_stream(bench::synthetic_stream("regime_switch", 0), 50);
        bench::BenchConfig cfg;
        cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7};
        std::vector<bench::BenchResult> rs, rp;
        const int few = std::max(1, reps / 10);
        const double ts = time_ms(few, [&] { rs = bench::run_bench(prepared, cfg, Execution::Serial); });
        const double tp = time_ms(few, [&] { rp = bench::run_bench(prepared, cfg, Execution::Parallel); });
        double diff = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            diff = std::max(diff, std::fabs(rs[i].marginal_coverage - rp[i].marginal_coverage));
            diff = std::max(diff, std::fabs(rs[i].mean_interval_size - rp[i].mean_interval_size));
        }
        row("time-series bench, 8 seeds", ts, tp, diff);
    }
    return 0;
}
