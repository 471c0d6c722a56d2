// Command-line entry point: bench, dagger, verify.
//
// Exit codes: 0 success, 1 a run failed or a property did not hold,
// 2 bad invocation, bad config or missing input file.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdagger/bench/metrics.hpp"
#include "cdagger/bench/timeseries.hpp"
#include "cdagger/dagger/experiment.hpp"
#include "cdagger/io/config.hpp"
#include "cdagger/io/manifest.hpp"
#include "cdagger/util/parallel.hpp"
#include "cdagger/verify/properties.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cdagger;

namespace {

constexpr const char* kOutEnv = "CDAGGER_OUT";

struct CommonArgs {
    std::string config;
    std::string out;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
};

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

fs::path output_dir(const CommonArgs& args, const std::string& command, const std::string& hash) {
    if (!args.out.empty()) return args.out;
    const char* root = std::getenv(kOutEnv);
    return fs::path(root && *root ? root : "results") / (command + "-" + hash);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string label(double v) {
    std::string s = io::format_double(v);
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
    }
    return s;
}

double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : bench::mean(v); }
double sd_of(const std::vector<double>& v) { return v.size() < 2 ? 0.0 : bench::stddev(v); }

// ---------------------------------------------------------------- bench

int cmd_bench(const CommonArgs& args, const std::vector<std::string>& argv, bool traces) {
    Clock clock;
    const fs::path config_path = args.config;
    auto cfg = io::BenchRunConfig::from_json(io::read_json_file(config_path), config_path.parent_path());
    if (args.seed) cfg.base.seeds = {*args.seed};
    set_thread_count(args.jobs);

    const json resolved = cfg.to_json();
    const std::string hash = io::config_hash(resolved);
    const fs::path out = output_dir(args, "bench", hash);
    fs::create_directories(out);

    std::ostringstream csv;
    csv << "dataset,p,lr,variant,seed,marginal_coverage,longest_err_run,mean_interval_size,"
           "lower_gap,lower_bound,upper_gap,upper_bound\n";
    json summary = json::array();
    std::vector<std::string> outputs;

    for (const auto& ds : cfg.datasets) {
        const auto prepared = bench::prepare_stream(ds.load(cfg.base_dir), cfg.base.warmup, cfg.base.ar_order);
        for (double p : cfg.p_levels) {
            for (double lr : cfg.learning_rates) {
                for (const auto& variant : cfg.variants) {
                    bench::BenchConfig bc = cfg.base;
                    bc.p = p;
                    bc.lr = lr;
                    bc.p_dependent = variant == "pd";
                    const auto results = bench::run_bench(prepared, bc, Execution::Parallel);
                    std::vector<double> cov, size, run;
                    for (const auto& r : results) {
                        csv << csv_escape(ds.name) << ',' << io::format_double(p) << ',' << io::format_double(lr) << ','
                            << variant << ',' << r.seed << ',' << io::format_double(r.marginal_coverage) << ','
                            << r.longest_err_run << ',' << io::format_double(r.mean_interval_size) << ','
                            << io::format_double(r.lower_side.gap) << ',' << io::format_double(r.lower_side.bound) << ','
                            << io::format_double(r.upper_side.gap) << ',' << io::format_double(r.upper_side.bound) << '\n';
                        cov.push_back(r.marginal_coverage);
                        size.push_back(r.mean_interval_size);
                        run.push_back(static_cast<double>(r.longest_err_run));
                        if (traces) {
                            const std::string name = "traces/" + ds.name + "_p" + label(p) + "_lr" + label(lr) + "_" +
                                                     variant + "_seed" + std::to_string(r.seed) + ".csv";
                            std::ostringstream t;
                            t << "t,y,yhat,lower,upper,obs,err,p,coverage_ma,interval_ma\n";
                            for (std::size_t i = 0; i < r.steps.size(); ++i) {
                                const auto& s = r.steps[i];
                                t << prepared.warmup + i << ',' << io::format_double(s.y) << ','
                                  << io::format_double(s.yhat) << ',' << io::format_double(s.lower) << ','
                                  << io::format_double(s.upper) << ',' << (s.observed ? 1 : 0) << ',' << s.err << ','
                                  << io::format_double(s.p) << ',' << io::format_double(r.coverage_trace[i]) << ','
                                  << io::format_double(r.interval_trace[i]) << '\n';
                            }
                            io::write_text(out / name, t.str());
                            outputs.push_back(name);
                        }
                    }
                    summary.push_back({{"dataset", ds.name},
                                       {"source", prepared.stream.source},
                                       {"p", p},
                                       {"lr", lr},
                                       {"variant", variant},
                                       {"seeds", results.size()},
                                       {"coverage_mean", mean_of(cov)},
                                       {"coverage_sd", sd_of(cov)},
                                       {"interval_size_mean", mean_of(size)},
                                       {"interval_size_sd", sd_of(size)},
                                       {"longest_err_run_mean", mean_of(run)}});
                    std::printf("%-16s p=%-4g lr=%-5g %s  coverage %.3f  size %.3f\n", ds.name.c_str(), p, lr,
                                variant.c_str(), mean_of(cov), mean_of(size));
                }
            }
        }
    }
    io::write_text(out / "bench_results.csv", csv.str());
    io::write_text(out / "summary.json", summary.dump(2) + "\n");
    outputs.insert(outputs.begin(), {"bench_results.csv", "summary.json"});

    io::RunManifest m{"bench", argv, resolved, hash, cfg.base.seeds, CDAGGER_BUILD_ID, clock.seconds(), outputs};
    m.write(out);
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

// ---------------------------------------------------------------- dagger

void write_step_log(const fs::path& path, const std::vector<dagger::EpisodeLog>& logs, std::size_t episode) {
    std::ostringstream t;
    t << "episode,execution,t";
    for (int i = 1; i <= 12; ++i) t << ",x" << i;
    const char* vecs[] = {"ar", "lower", "upper", "ah", "oracle"};
    for (const char* v : vecs) {
        for (int i = 1; i <= 4; ++i) t << ',' << v << i;
    }
    t << ",width,p_robot,p_human,p_obs,query,intervention,observed,miscovered\n";
    for (std::size_t e = 0; e < logs.size(); ++e) {
        for (std::size_t k = 0; k < logs[e].steps.size(); ++k) {
            const auto& s = logs[e].steps[k];
            t << episode << ',' << e << ',' << k;
            for (double v : s.x) t << ',' << io::format_double(v);
            auto put = [&](const dagger::Vec4& a) {
                for (double v : a) t << ',' << io::format_double(v);
            };
            put(s.robot_action);
            put(s.lower);
            put(s.upper);
            if (s.expert_action) {
                put(*s.expert_action);
            } else {
                t << ",,,,";
            }
            put(s.oracle_action);
            t << ',' << io::format_double(s.width) << ',' << io::format_double(s.p_robot) << ','
              << io::format_double(s.p_human) << ',' << io::format_double(s.p_obs) << ',' << s.query << ','
              << s.intervention << ',' << s.expert_action.has_value() << ',' << s.miscovered << '\n';
        }
    }
    io::write_text(path, t.str());
}

int cmd_dagger(const CommonArgs& args, const std::vector<std::string>& argv) {
    Clock clock;
    auto cfg = io::DaggerRunConfig::from_json(io::read_json_file(args.config));
    if (args.seed) cfg.seeds = {*args.seed};
    set_thread_count(args.jobs);

    const json resolved = cfg.to_json();
    const std::string hash = io::config_hash(resolved);
    const fs::path out = output_dir(args, "dagger", hash);
    fs::create_directories(out);

    struct Job {
        std::string method, scenario;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& m : cfg.methods) {
        for (const auto& s : cfg.scenarios) {
            for (auto seed : cfg.seeds) jobs.push_back({m, s, seed});
        }
    }
    std::vector<dagger::RunMetrics> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::vector<std::vector<std::string>> step_files(jobs.size());
    std::mutex print;

    // Runs are independent; each writes only its own step-log files.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
        const auto& job = jobs[i];
        try {
            auto ec = cfg.experiment;
            ec.method = dagger::method_from_name(job.method);
            ec.scenario.kind = sim::Scenario::from_name(job.scenario).kind;
            Clock run_clock;
            auto run = dagger::run_full_experiment(ec, job.seed);
            if (cfg.step_logs) {
                for (std::size_t e = 0; e < run.logs.size(); ++e) {
                    const std::string name = "steps/" + job.method + "_" + job.scenario + "_seed" +
                                             std::to_string(job.seed) + "_ep" + std::to_string(e) + ".csv";
                    write_step_log(out / name, run.logs[e], e);
                    step_files[i].push_back(name);
                }
            }
            results[i] = std::move(run.metrics);
            std::lock_guard lock(print);
            std::printf("%-9s %-10s seed %-3llu  intervention %.3f  miscoverage %.3f  (%.1fs)\n", job.method.c_str(),
                        job.scenario.c_str(), static_cast<unsigned long long>(job.seed),
                        results[i].intervention_pct(), results[i].miscoverage_rate(), run_clock.seconds());
            std::fflush(stdout);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    int status = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!errors[i].empty()) {
            std::fprintf(stderr, "run %s/%s/seed %llu failed: %s\n", jobs[i].method.c_str(), jobs[i].scenario.c_str(),
                         static_cast<unsigned long long>(jobs[i].seed), errors[i].c_str());
            status = 1;
        }
    }

    std::ostringstream csv;
    csv << "episode,method,scenario,seed,intervention_pct,miscoverage,decision_dev,trajectory_dev\n";
    // Per (method, scenario): per-episode mean and sd over seeds.
    std::map<std::pair<std::string, std::string>, std::vector<const dagger::RunMetrics*>> groups;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!errors[i].empty()) continue;
        const auto& r = results[i];
        for (const auto& e : r.episodes) {
            csv << e.episode << ',' << jobs[i].method << ',' << jobs[i].scenario << ',' << r.seed << ','
                << io::format_double(e.intervention_pct) << ',' << io::format_double(e.miscoverage) << ','
                << io::format_double(e.decision_dev) << ',' << io::format_double(e.trajectory_dev) << '\n';
        }
        groups[{jobs[i].method, jobs[i].scenario}].push_back(&r);
    }
    json panels = json::array();
    for (const auto& [key, runs] : groups) {
        json episodes = json::array();
        for (std::size_t e = 0; e < cfg.experiment.episodes; ++e) {
            std::vector<double> iv, mc, dd, td;
            for (const auto* r : runs) {
                iv.push_back(r->episodes[e].intervention_pct);
                mc.push_back(r->episodes[e].miscoverage);
                dd.push_back(r->episodes[e].decision_dev);
                td.push_back(r->episodes[e].trajectory_dev);
            }
            episodes.push_back({{"episode", e},
                                {"intervention_pct", {{"mean", mean_of(iv)}, {"sd", sd_of(iv)}}},
                                {"miscoverage", {{"mean", mean_of(mc)}, {"sd", sd_of(mc)}}},
                                {"decision_dev", {{"mean", mean_of(dd)}, {"sd", sd_of(dd)}}},
                                {"trajectory_dev", {{"mean", mean_of(td)}, {"sd", sd_of(td)}}}});
        }
        std::vector<double> iv, mc;
        for (const auto* r : runs) {
            iv.push_back(r->intervention_pct());
            mc.push_back(r->miscoverage_rate());
        }
        panels.push_back({{"method", key.first},
                          {"scenario", key.second},
                          {"seeds", runs.size()},
                          {"intervention_pct_mean", mean_of(iv)},
                          {"miscoverage_rate_mean", mean_of(mc)},
                          {"episodes", episodes}});
    }
    io::write_text(out / "metrics.csv", csv.str());
    io::write_text(out / "summary.json", panels.dump(2) + "\n");

    std::vector<std::string> outputs{"metrics.csv", "summary.json"};
    for (const auto& files : step_files) outputs.insert(outputs.end(), files.begin(), files.end());
    io::RunManifest m{"dagger", argv, resolved, hash, cfg.seeds, CDAGGER_BUILD_ID, clock.seconds(), outputs};
    m.write(out);
    std::printf("wrote %s\n", out.string().c_str());
    return status;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const CommonArgs& args, const std::vector<std::string>& argv, const std::string& mutation,
               bool verbose) {
    Clock clock;
    verify::VerifyOptions opt;
    if (args.seed) opt.seed = *args.seed;
    if (mutation == "sign-flip") opt.rule = conformal::UpdateRule::SignFlipped;
    set_thread_count(args.jobs);

    const auto results = verify::run_all(opt);
    bool all = true;
    std::printf("%-18s %-6s %s\n", "check", "result", "detail");
    for (const auto& r : results) {
        std::printf("%-18s %-6s %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.summary.c_str());
        if (verbose || !r.passed || r.name == "coverage bound" || r.name == "gradient check") {
            for (const auto& d : r.details) std::printf("    %s\n", d.c_str());
        }
        all = all && r.passed;
    }

    if (!args.out.empty()) {
        const fs::path out = args.out;
        json table = json::array();
        for (const auto& r : results) {
            table.push_back({{"check", r.name}, {"passed", r.passed}, {"summary", r.summary}, {"details", r.details}});
        }
        io::write_text(out / "verify.json", table.dump(2) + "\n");
        const json resolved{{"seed", opt.seed}, {"mutation", mutation.empty() ? "none" : mutation}};
        io::RunManifest m{"verify", argv, resolved, io::config_hash(resolved), {opt.seed}, CDAGGER_BUILD_ID,
                          clock.seconds(), {"verify.json"}};
        m.write(out);
    }
    std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args_list(argv, argv + argc);
    CLI::App app{"Intermittent conformal quantile tracking: time-series benchmark and interactive imitation runs"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", common.config, "Config file (JSON, comments allowed)");
        if (needs_config) opt->required();
        sub->add_option("--out", common.out,
                        std::string("Output directory (default: $") + kOutEnv + " or ./results, plus command-hash)");
        sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", common.seed, "Run only this seed");
    };

    auto* bench_cmd = app.add_subcommand("bench", "Time-series coverage benchmark");
    add_common(bench_cmd, true);
    bool no_traces = false;
    bench_cmd->add_flag("--no-traces", no_traces, "Skip the per-run per-step trace CSVs");

    auto* dagger_cmd = app.add_subcommand("dagger", "Simulated interactive imitation learning runs");
    add_common(dagger_cmd, true);

    auto* verify_cmd = app.add_subcommand("verify", "Property suite with a pass/fail table");
    add_common(verify_cmd, false);
    std::string mutation;
    bool verbose = false;
    verify_cmd->add_option("--mutate", mutation, "Corrupt the update rule to test the suite")
        ->check(CLI::IsMember({"sign-flip"}));
    verify_cmd->add_flag("-v,--verbose", verbose, "Print per-run details");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*bench_cmd) return cmd_bench(common, args_list, !no_traces);
        if (*dagger_cmd) return cmd_dagger(common, args_list);
        if (*verify_cmd) return cmd_verify(common, args_list, mutation, verbose);
    } catch (const io::MissingPath& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const io::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
