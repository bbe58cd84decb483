// abdex: abductive diagnosis engine over a typed causal belief graph.
//
// Subcommands: run, batch, generate, sweep, audit, replay, validate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "abdex/engine.hpp"
#include "abdex/evaluation.hpp"
#include "abdex/generator.hpp"
#include "abdex/remote.hpp"

namespace fs = std::filesystem;
using namespace abdex;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    double delta = 0.2;
    std::uint32_t eta = 2;
    std::uint32_t max_iterations = 3;
    std::uint32_t expert_budget = 3;
    std::vector<std::string> ablations;
    std::string cognition = "oracle";
    std::string out = ".";
    std::size_t jobs = 1;
};

RunConfig make_config(const GlobalOpts& o) {
    RunConfig cfg;
    cfg.seed = o.seed;
    cfg.params.gap_delta = o.delta;
    cfg.params.min_support = o.eta;
    cfg.params.max_iterations = o.max_iterations;
    cfg.params.expert_budget = o.expert_budget;
    for (const std::string& a : o.ablations) cfg.ablations.insert(parse_ablation(a));
    if (o.cognition == "oracle") {
        cfg.cognition = CognitionBackend::Oracle;
    } else if (o.cognition == "remote") {
        cfg.cognition = CognitionBackend::Remote;
    } else {
        throw ValidationError("unknown cognition backend '" + o.cognition + "'");
    }
    return cfg;
}

// Staged write: nothing lands at `path` unless the full payload was
// written.
void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

EpisodeResult run_with_backend(const Scenario& scenario, const RunConfig& cfg) {
    if (cfg.cognition == CognitionBackend::Remote) {
        RemoteCognition remote(RemoteConfig::from_env());
        EpisodeResult r = run_episode(scenario, cfg, &remote);
        std::fprintf(stderr, "tokens: prompt=%llu completion=%llu\n",
                     static_cast<unsigned long long>(remote.prompt_tokens()),
                     static_cast<unsigned long long>(remote.completion_tokens()));
        return r;
    }
    return run_episode(scenario, cfg);
}

std::vector<Scenario> load_all(const std::vector<std::string>& paths) {
    std::vector<Scenario> out;
    for (const std::string& p : paths) out.push_back(load_scenario(p));
    return out;
}

std::vector<double> parse_double_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<std::uint32_t> parse_uint_grid(const std::string& csv) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"abdex: abductive diagnosis engine"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "", "Configuration file (same keys as the flags)");

    GlobalOpts o;
    app.add_option("--seed", o.seed, "Deterministic seed")->capture_default_str();
    app.add_option("--delta", o.delta, "Confidence gap threshold for drill-down")
        ->capture_default_str();
    app.add_option("--eta", o.eta, "Minimum supporting evidence for drill-down")
        ->capture_default_str();
    app.add_option("--max-iterations", o.max_iterations, "Interaction iterations per episode")
        ->capture_default_str();
    app.add_option("--expert-budget", o.expert_budget, "Tool actions per expert per iteration")
        ->capture_default_str();
    app.add_option("--ablate", o.ablations,
                   "Disable a component: no_focus, no_graph, no_state_machine");
    app.add_option("--cognition", o.cognition, "Cognition backend: oracle or remote")
        ->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--jobs", o.jobs, "Parallel episodes for batch/sweep")->capture_default_str();

    std::string scenario_path, trace_path;
    std::vector<std::string> scenario_paths;

    auto* cmd_run = app.add_subcommand("run", "Run one diagnostic episode");
    cmd_run->add_option("--scenario", scenario_path, "Scenario file")->required();

    auto* cmd_batch = app.add_subcommand("batch", "Run a scenario batch and report metrics");
    cmd_batch->add_option("--scenario", scenario_paths, "Scenario files")->required();

    std::uint64_t gen_seed = 1;
    std::uint32_t gen_depth = 3, gen_branching = 2, gen_count = 1;
    bool gen_misleading = false;
    auto* cmd_gen = app.add_subcommand("generate", "Generate synthetic scenarios");
    cmd_gen->add_option("--gen-seed", gen_seed, "First generator seed")->capture_default_str();
    cmd_gen->add_option("--depth", gen_depth, "Taxonomy depth (2..5)")->capture_default_str();
    cmd_gen->add_option("--branching", gen_branching, "Branching factor (2..4)")
        ->capture_default_str();
    cmd_gen->add_flag("--misleading", gen_misleading,
                      "Plant a high-prior decoy refuted by deep evidence");
    cmd_gen->add_option("--count", gen_count, "Number of scenarios (consecutive seeds)")
        ->capture_default_str();

    std::string delta_grid = "0.1,0.2,0.3", eta_grid = "1,2,3,4";
    auto* cmd_sweep = app.add_subcommand("sweep", "Full-factorial delta/eta sweep");
    cmd_sweep->add_option("--scenario", scenario_paths, "Scenario files")->required();
    cmd_sweep->add_option("--delta-grid", delta_grid, "Comma-separated deltas")
        ->capture_default_str();
    cmd_sweep->add_option("--eta-grid", eta_grid, "Comma-separated etas")->capture_default_str();

    auto* cmd_audit = app.add_subcommand("audit", "Audit a trace for the five error types");
    cmd_audit->add_option("--trace", trace_path, "Trace file (JSONL)")->required();
    cmd_audit->add_option("--scenario", scenario_path, "Scenario the trace ran against")
        ->required();

    auto* cmd_replay = app.add_subcommand("replay", "Reconstruct the final graph from a trace");
    cmd_replay->add_option("--trace", trace_path, "Trace file (JSONL)")->required();

    auto* cmd_validate = app.add_subcommand("validate", "Validate a scenario file");
    cmd_validate->add_option("--scenario", scenario_path, "Scenario file")->required();

    bool greedy = false;
    cmd_run->add_flag("--greedy-baseline", greedy,
                      "Use the no-backtracking greedy baseline instead of the engine");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = make_config(o);

        if (*cmd_run) {
            Scenario sc = load_scenario(scenario_path);
            EpisodeResult r = greedy ? greedy_baseline(sc, cfg) : run_with_backend(sc, cfg);
            Verdict v = judge(r.report, sc);
            write_file(fs::path(o.out) / (sc.id + ".trace.jsonl"), r.trace.to_jsonl());
            json report{{"prediction", r.report.prediction},
                        {"narrative", r.report.narrative},
                        {"score", v.score},
                        {"terminal_level", r.final_state.level},
                        {"iterations", r.final_state.iteration}};
            write_file(fs::path(o.out) / (sc.id + ".report.json"), report.dump(2) + "\n");
            std::cout << "prediction: " << r.report.prediction << "\n"
                      << "score: " << v.score << "\n"
                      << r.report.narrative << "\n";
        } else if (*cmd_batch) {
            auto scenarios = load_all(scenario_paths);
            MetricsRow row = run_batch(scenarios, cfg, o.jobs);
            std::string csv = metrics_to_csv({row});
            write_file(fs::path(o.out) / "batch_metrics.csv", csv);
            std::cout << csv;
        } else if (*cmd_gen) {
            for (std::uint32_t i = 0; i < gen_count; ++i) {
                Scenario sc =
                    generate_scenario(gen_seed + i, gen_depth, gen_branching, gen_misleading);
                fs::path path = fs::path(o.out) / (sc.id + ".json");
                write_file(path, sc.to_json().dump(2) + "\n");
                std::cout << path.string() << "\n";
            }
        } else if (*cmd_sweep) {
            auto scenarios = load_all(scenario_paths);
            auto rows =
                sweep(scenarios, parse_double_grid(delta_grid), parse_uint_grid(eta_grid), cfg,
                      o.jobs);
            std::string csv = metrics_to_csv(rows);
            write_file(fs::path(o.out) / "sweep_metrics.csv", csv);
            std::cout << csv;
        } else if (*cmd_audit) {
            EpisodeTrace trace = EpisodeTrace::load(trace_path);
            Scenario sc = load_scenario(scenario_path);
            json findings = audit_to_json(audit(trace, sc));
            write_file(fs::path(o.out) / (trace.episode_id + ".audit.json"),
                       findings.dump(2) + "\n");
            std::cout << findings.dump(2) << "\n";
        } else if (*cmd_replay) {
            EpisodeTrace trace = EpisodeTrace::load(trace_path);
            std::cout << replay(trace).serialize() << "\n";
        } else if (*cmd_validate) {
            std::ifstream in(scenario_path);
            if (!in) throw ParseError("cannot open scenario file '" + scenario_path + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            json j = json::parse(buf.str(), nullptr, false);
            if (j.is_discarded()) throw ParseError("scenario file is not valid JSON");
            Scenario sc = Scenario::from_json(j);
            auto errs = sc.validation_errors();
            if (!errs.empty()) {
                for (const std::string& e : errs) std::cerr << "invalid: " << e << "\n";
                return 1;
            }
            std::cout << "ok: " << sc.id << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
