#include "agentsim/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "agentsim/errors.hpp"
#include "agentsim/io.hpp"
#include "agentsim/metrics.hpp"
#include "json.hpp"

namespace agentsim {

std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int i = 10; i <= 100; ++i) {
        g.push_back(i / 10.0);
    }
    return g;
}

void apply_run_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.contains("trace")) cfg.trace = j["trace"].get<std::string>();
        if (j.contains("cluster")) cfg.cluster = j["cluster"].get<std::string>();
        if (j.contains("policy")) cfg.policy = j["policy"].get<std::string>();
        if (j.contains("policies")) cfg.policies = j["policies"].get<std::vector<std::string>>();
        if (j.contains("est_error")) cfg.est_error = j["est_error"].get<double>();
        if (j.contains("pred_error")) cfg.pred_error = j["pred_error"].get<double>();
        if (j.contains("planning_latency_s")) cfg.planning_latency = j["planning_latency_s"].get<double>();
        if (j.contains("bootstrap_latency_s")) cfg.bootstrap_latency = j["bootstrap_latency_s"].get<double>();
        if (j.contains("out")) cfg.out = j["out"].get<std::string>();
        if (j.contains("alphas")) cfg.alphas = j["alphas"].get<std::vector<double>>();
        if (j.contains("greedy_threshold")) cfg.greedy_threshold = j["greedy_threshold"].get<int>();
        if (j.contains("llf_kappa")) cfg.llf_kappa = j["llf_kappa"].get<double>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    // Relative paths in a config file resolve against the file's directory.
    const auto base = path.parent_path();
    for (auto* p : {&cfg.trace, &cfg.cluster}) {
        if (!p->empty() && p->is_relative() && j.contains(p == &cfg.trace ? "trace" : "cluster")) {
            *p = base / *p;
        }
    }
}

void validate_run_config(const RunConfig& cfg) {
    parse_policy(cfg.policy);
    for (const auto& p : cfg.policies) parse_policy(p);
    if (cfg.trace.empty()) throw ConfigError("no trace given");
    if (cfg.cluster.empty()) throw ConfigError("no cluster given");
    if (!std::filesystem::exists(cfg.trace)) throw ConfigError("trace not found: " + cfg.trace.string());
    if (!std::filesystem::exists(cfg.cluster)) throw ConfigError("cluster not found: " + cfg.cluster.string());
    if (cfg.est_error < 0.0 || cfg.est_error >= 1.0) throw ConfigError("est_error must lie in [0, 1)");
    if (cfg.pred_error < 0.0 || cfg.pred_error >= 1.0) throw ConfigError("pred_error must lie in [0, 1)");
    if (cfg.planning_latency < 0.0) throw ConfigError("planning latency must be >= 0");
    if (cfg.bootstrap_latency < 0.0) throw ConfigError("bootstrap latency must be >= 0");
    if (cfg.greedy_threshold < 0) throw ConfigError("threshold must be >= 0");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
    for (std::size_t i = 1; i < cfg.alphas.size(); ++i) {
        if (!(cfg.alphas[i] > cfg.alphas[i - 1])) throw ConfigError("alpha grid must be strictly ascending");
    }
}

SimConfig sim_config(const RunConfig& cfg) {
    SimConfig s;
    s.planning_latency = cfg.planning_latency;
    s.bootstrap_latency = cfg.bootstrap_latency;
    if (cfg.est_error > 0.0) s.est_error = {cfg.est_error, ErrorMode::DeterministicMultiplicative};
    if (cfg.pred_error > 0.0) s.predictor = {cfg.pred_error, ErrorMode::DeterministicMultiplicative};
    s.measure_wallclock = cfg.wallclock;
    s.record_horizons = cfg.horizons;
    return s;
}

PolicyConfig policy_config(const RunConfig& cfg, std::string_view policy) {
    PolicyConfig p;
    p.kind = parse_policy(policy);
    p.greedy_threshold = cfg.greedy_threshold;
    p.llf_kappa = cfg.llf_kappa;
    return p;
}

namespace {

struct Loaded {
    Trace trace;
    ClusterSpec cluster;
};

Loaded load(const RunConfig& cfg) {
    validate_run_config(cfg);
    Loaded l;
    l.cluster = read_cluster(cfg.cluster);
    l.trace = build_trace(read_trace_records(cfg.trace));
    return l;
}

struct PolicyRun {
    SimResult result;
    SummaryRow row;
    std::vector<AttainmentPoint> curve;
};

PolicyRun run_one(const Loaded& l, const RunConfig& cfg, const std::string& policy) {
    PolicyRun r;
    r.result = run(l.trace, l.cluster, policy_config(cfg, policy), sim_config(cfg));
    r.row.policy = r.result.policy;
    r.row.trace = cfg.trace.stem().string();
    if (!r.result.workflows.empty()) {
        r.row.req = req_pair(r.result);
        const auto ratios = completion_ratios(r.result);
        const auto grid = cfg.alphas.empty() ? default_alpha_grid() : cfg.alphas;
        r.curve = attainment_curve(ratios, grid);
    }
    r.row.overhead = overhead_summary(r.result.planner);
    return r;
}

template <class F>
std::string render(F&& f) {
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

void write_outputs(const std::filesystem::path& dir, const Loaded& l, const PolicyRun& r, bool horizons) {
    write_file_atomic(dir / "calls.csv", render([&](std::ostream& o) { write_calls_csv(o, l.trace, r.result); }));
    write_file_atomic(dir / "workflows.csv", render([&](std::ostream& o) { write_workflows_csv(o, r.result); }));
    write_file_atomic(dir / "planner.csv", render([&](std::ostream& o) { write_planner_csv(o, r.result); }));
    write_file_atomic(dir / "curve.csv", render([&](std::ostream& o) { write_curve_csv(o, r.curve); }));
    write_file_atomic(dir / "summary.csv", render([&](std::ostream& o) {
                          write_summary_csv(o, std::span<const SummaryRow>(&r.row, 1));
                      }));
    if (horizons) {
        write_file_atomic(dir / "horizons.csv", render([&](std::ostream& o) { write_horizons_csv(o, r.result); }));
    }
}

void print_row(std::ostream& out, const SummaryRow& row) {
    out << row.policy << ": Req95=" << format_double(row.req.req95) << " Req99=" << format_double(row.req.req99)
        << " planner=" << row.overhead.invocations << " inv, " << format_double(row.overhead.mean_ms) << " ms/inv\n";
}

template <class F>
int guarded(std::ostream& err, F&& f) {
    try {
        return f();
    } catch (const SimError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
    }
    return 1;
}

}  // namespace

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto l = load(cfg);
        const auto r = run_one(l, cfg, cfg.policy);
        write_outputs(cfg.out, l, r, cfg.horizons);
        print_row(out, r.row);
        return 0;
    });
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.policies.empty()) {
            throw ConfigError("compare needs at least one policy");
        }
        const auto l = load(cfg);
        std::vector<PolicyRun> runs(cfg.policies.size());
        if (cfg.jobs > 1) {
            // Simulations share only read-only inputs.
            std::vector<std::future<PolicyRun>> pending;
            for (const auto& p : cfg.policies) {
                pending.push_back(std::async(std::launch::async, [&, p] { return run_one(l, cfg, p); }));
            }
            for (std::size_t i = 0; i < pending.size(); ++i) runs[i] = pending[i].get();
        } else {
            for (std::size_t i = 0; i < cfg.policies.size(); ++i) runs[i] = run_one(l, cfg, cfg.policies[i]);
        }
        std::vector<SummaryRow> rows;
        for (const auto& r : runs) {
            write_outputs(cfg.out / r.row.policy, l, r, cfg.horizons);
            rows.push_back(r.row);
            print_row(out, r.row);
        }
        write_file_atomic(cfg.out / "compare.csv", render([&](std::ostream& o) { write_summary_csv(o, rows); }));
        return 0;
    });
}

int cmd_gen(const GenConfig& cfg, const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto records = gen_trace(cfg);
        // Round-trip through validation so a generator bug cannot ship a bad file.
        const auto trace = build_trace(records);
        write_trace_records(path, records);
        out << "wrote " << trace.workflows.size() << " workflows, " << trace.calls.size() << " calls to "
            << path.string() << '\n';
        return 0;
    });
}

int cmd_describe(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto trace = build_trace(read_trace_records(path));
        const auto s = describe_trace(trace);
        out << "workflows " << s.workflows << "\ncalls " << s.calls << "\nmax_depth " << s.max_depth
            << "\nmax_width " << s.max_width << "\narrivals " << format_double(s.first_arrival) << " .. "
            << format_double(s.last_arrival) << '\n';
        out << "depth_histogram";
        for (const auto& [k, v] : s.depth_histogram) out << ' ' << k << ':' << v;
        out << "\nwidth_histogram";
        for (const auto& [k, v] : s.width_histogram) out << ' ' << k << ':' << v;
        out << "\ninput_len p50/p90/p99/max " << s.input_pct[0] << '/' << s.input_pct[1] << '/' << s.input_pct[2]
            << '/' << s.input_pct[3];
        out << "\noutput_len p50/p90/p99/max " << s.output_pct[0] << '/' << s.output_pct[1] << '/'
            << s.output_pct[2] << '/' << s.output_pct[3] << '\n';
        return 0;
    });
}

int cli_main(int argc, char** argv) {
    CLI::App app{"agentsim: workflow scheduling simulator for disaggregated LLM serving"};
    app.require_subcommand(1);

    RunConfig flags;
    std::filesystem::path config_path;
    std::string policies_csv;

    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config; flags override its values");
        sub->add_option("--trace", flags.trace, "trace file (JSON lines)");
        sub->add_option("--cluster", flags.cluster, "cluster file (JSON)");
        sub->add_option("--est-error", flags.est_error, "multiplicative service-time estimation error");
        sub->add_option("--pred-error", flags.pred_error, "multiplicative output-length prediction error");
        sub->add_option("--planning-latency", flags.planning_latency, "simulated planner latency, seconds");
        sub->add_option("--bootstrap-latency", flags.bootstrap_latency, "per-call bootstrap delay, seconds");
        sub->add_option("--out", flags.out, "output directory (AGENTSIM_OUT also sets it)");
        sub->add_option("--alphas", flags.alphas, "attainment curve grid")->delimiter(',');
        sub->add_option("--threshold", flags.greedy_threshold, "greedy planner queue-size threshold");
        sub->add_option("--kappa", flags.llf_kappa, "LLF deadline multiplier");
        sub->add_flag("--no-wallclock", "record zero planner wall time, for byte-stable outputs");
        sub->add_flag("--horizons", flags.horizons, "also write the online horizon trajectory");
    };

    auto* run_cmd = app.add_subcommand("run", "simulate one policy");
    add_run_flags(run_cmd);
    run_cmd->add_option("--policy", flags.policy, "hexagent|fcfs-call|fcfs-wf|llf|atlas");

    auto* cmp_cmd = app.add_subcommand("compare", "simulate several policies on the same inputs");
    add_run_flags(cmp_cmd);
    cmp_cmd->add_option("--policies", policies_csv, "comma-separated policy list")
        ->default_str("fcfs-call,fcfs-wf,hexagent");
    cmp_cmd->add_option("--jobs", flags.jobs, "policies simulated concurrently");

    GenConfig gen;
    std::string kind = "mixed";
    std::filesystem::path gen_out = "trace.jsonl";
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic trace");
    gen_cmd->add_option("--kind", kind, "chain|funccall|tree|mixed");
    gen_cmd->add_option("--n", gen.n_workflows, "workflows");
    gen_cmd->add_option("--rate", gen.rate, "arrivals per second");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--branching", gen.tree_branching, "tree branching factor");
    gen_cmd->add_option("--depth", gen.tree_depth, "tree depth");
    gen_cmd->add_option("--chain-mean", gen.chain_mean_len, "mean chain length");
    gen_cmd->add_option("--tool-delay", gen.tool_delay_hi, "max tool delay between function calls, seconds");
    gen_cmd->add_option("--out", gen_out, "output trace path");

    std::filesystem::path describe_path;
    auto* desc_cmd = app.add_subcommand("describe", "summarize a trace");
    desc_cmd->add_option("trace", describe_path, "trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (*gen_cmd) {
        try {
            gen.kind = parse_workload_kind(kind);
        } catch (const ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        return cmd_gen(gen, gen_out, std::cout, std::cerr);
    }
    if (*desc_cmd) {
        return cmd_describe(describe_path, std::cout, std::cerr);
    }

    CLI::App* sub = *run_cmd ? run_cmd : cmp_cmd;
    RunConfig cfg;
    try {
        if (!config_path.empty()) {
            apply_run_config_file(cfg, config_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    if (const char* env = std::getenv("AGENTSIM_OUT"); env && *env) {
        cfg.out = env;
    }
    auto given = [&](const char* name) { return sub->count(name) > 0; };
    if (given("--trace")) cfg.trace = flags.trace;
    if (given("--cluster")) cfg.cluster = flags.cluster;
    if (given("--est-error")) cfg.est_error = flags.est_error;
    if (given("--pred-error")) cfg.pred_error = flags.pred_error;
    if (given("--planning-latency")) cfg.planning_latency = flags.planning_latency;
    if (given("--bootstrap-latency")) cfg.bootstrap_latency = flags.bootstrap_latency;
    if (given("--out")) cfg.out = flags.out;
    if (given("--alphas")) cfg.alphas = flags.alphas;
    if (given("--threshold")) cfg.greedy_threshold = flags.greedy_threshold;
    if (given("--kappa")) cfg.llf_kappa = flags.llf_kappa;
    if (given("--no-wallclock")) cfg.wallclock = false;
    cfg.horizons = cfg.horizons || flags.horizons;

    if (*run_cmd) {
        if (given("--policy")) cfg.policy = flags.policy;
        return cmd_run(cfg, std::cout, std::cerr);
    }
    if (given("--jobs")) cfg.jobs = flags.jobs;
    if (given("--policies") || cfg.policies.empty()) {
        cfg.policies.clear();
        std::stringstream ss(given("--policies") ? policies_csv : std::string("fcfs-call,fcfs-wf,hexagent"));
        for (std::string p; std::getline(ss, p, ',');) {
            if (!p.empty()) cfg.policies.push_back(p);
        }
    }
    return cmd_compare(cfg, std::cout, std::cerr);
}

}  // namespace agentsim
