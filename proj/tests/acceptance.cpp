// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "agentsim/cli.hpp"
#include "agentsim/errors.hpp"
#include "agentsim/horizon.hpp"
#include "agentsim/io.hpp"
#include "agentsim/metrics.hpp"
#include "agentsim/policy.hpp"
#include "oracles/engine_oracle.hpp"
#include "oracles/horizon_oracle.hpp"
#include "support.hpp"

using namespace agentsim;
using namespace agentsim::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = AGENTSIM_SOURCE_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

ClusterSpec load_cluster(const char* name) { return read_cluster(kRoot / "configs" / name); }
Trace load_trace(const char* name) { return build_trace(read_trace_records(kRoot / "data" / name)); }

SimResult simulate(const Trace& t, const ClusterSpec& c, PolicyKind k, double est_error = 0.0,
                   bool wallclock = false) {
    PolicyConfig p;
    p.kind = k;
    SimConfig cfg;
    cfg.measure_wallclock = wallclock;
    if (est_error > 0.0) cfg.est_error = {est_error, ErrorMode::DeterministicMultiplicative};
    return run(t, c, p, cfg);
}

// Every run seen by the suite, for the metric-property checks.
std::vector<std::pair<std::string, ReqPair>> g_runs;
std::vector<std::vector<double>> g_ratios;

ReqPair note(const std::string& name, const SimResult& r) {
    auto q = req_pair(r);
    g_runs.emplace_back(name, q);
    g_ratios.push_back(completion_ratios(r));
    return q;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    const auto t0 = Clock::now();
    auto c = table_cluster({{"A", 0.02, 0.2, 0}, {"B", 0.01, 0.1, 0}}, {{"A", 0.02, 0.2, 12}, {"B", 0.01, 0.1, 20}}, 1.0,
                           40.0, 25.0, 0.05);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> nwf(1, 2), ncalls(1, 6);
    std::uniform_real_distribution<double> arrival(0.0, 2.0);
    double worst = 0.0;
    int mismatched = 0;
    for (int inst = 0; inst < 200; ++inst) {
        std::vector<WorkflowDef> wfs;
        int budget = 6;
        const int w = nwf(rng);
        for (int i = 0; i < w && budget > 0; ++i) {
            const int n = std::min(budget, i + 1 == w ? ncalls(rng) : std::max(1, ncalls(rng) / 2));
            budget -= n;
            // Some instances share arrival times to exercise tie-breaks.
            const double a = inst % 4 == 0 ? 0.0 : std::round(arrival(rng) * 4.0) / 4.0;
            wfs.push_back({a, random_dag(rng, n, 8, 6, inst % 3 == 0)});
        }
        auto t = trace_of(wfs);
        PolicyConfig p;
        p.kind = PolicyKind::WorkflowFCFS;
        SimConfig cfg;
        cfg.planning_latency = 0.0;
        cfg.measure_wallclock = false;
        auto r = run(t, c, p, cfg);
        auto expect = oracle::WorkflowFcfsOracle(t, c).run();
        bool ok = true;
        for (std::size_t i = 0; i < expect.size(); ++i) {
            const double err = std::abs(r.calls[i].entered_at(CallState::Complete) - expect[i]);
            worst = std::max(worst, err);
            ok = ok && err <= 1e-9;
        }
        if (!ok) ++mismatched;
    }
    const double secs = seconds_since(t0);
    return {mismatched == 0 && secs < 10.0, "200 instances, mismatched=" + std::to_string(mismatched) +
                                                ", max |dC|=" + fmt(worst, 12) + " s, " + fmt(secs, 2) + " s"};
}

Outcome ac2() {
    const auto t0 = Clock::now();
    auto c = table_cluster({{"A", 2e-3, 2e-2, 0}, {"B", 1e-3, 1.2e-2, 0}, {"B", 1e-3, 1.2e-2, 0}},
                           {{"A", 2e-3, 2e-2, 900}, {"B", 1e-3, 1.2e-2, 1400}}, 1.0, 2e5, 8e4, 0.003);
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> nodes(1, 8);
    int bad = 0, bad_single = 0;
    for (int i = 0; i < 100; ++i) {
        auto t = trace_of({{0.0, random_dag(rng, nodes(rng), 600, 400, i % 2 == 0)}});
        Estimator est(c);
        auto lens = true_output_lengths(t);
        const auto& wf = t.workflow(0);
        if (standalone_horizon(wf.calls, t, est, lens) != oracle::isolated_makespan(t, wf, c)) ++bad;
        for (auto id : wf.calls) {
            const CallId one[] = {id};
            if (standalone_horizon(one, t, est, lens) != oracle::single_call_path(t.call(id), c)) ++bad_single;
        }
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && bad_single == 0 && secs < 10.0,
            "100 DAGs, mismatched=" + std::to_string(bad) + ", single-node mismatched=" + std::to_string(bad_single) +
                ", " + fmt(secs, 2) + " s"};
}

Outcome ac3() {
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<int> cap_d(1, 4096), len(4, 30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long admitted = 0, rejected = 0, violations = 0, missed_throws = 0;
    for (int seq = 0; seq < 10000; ++seq) {
        const Tokens cap = cap_d(rng);
        DecodeCapacityLedger l(cap);
        std::vector<DecodeInterval> mine;
        Seconds clock = 0.0;
        const int n = len(rng);
        for (int k = 0; k < n; ++k) {
            const Tokens m = 1 + static_cast<Tokens>(u(rng) * static_cast<double>(cap));
            const Seconds dur = 0.1 + 5.0 * u(rng);
            clock += u(rng);
            if (u(rng) < 0.2) l.release_until(clock);
            Seconds start = earliest_feasible_decode_start(l, m, dur, clock);
            if (u(rng) < 0.25) {
                // Force an arbitrary start: the ledger must refuse it if it overflows.
                start = clock;
            }
            try {
                start_decode(l, m, start, dur);
                mine.push_back({start, start + dur, m});
                ++admitted;
            } catch (const CapacityViolation&) {
                ++rejected;
                // A refusal must be justified.
                Tokens peak = 0;
                std::vector<Seconds> probes{start};
                for (const auto& iv : mine) {
                    if (iv.start > start && iv.start < start + dur) probes.push_back(iv.start);
                }
                for (auto p : probes) {
                    Tokens used = 0;
                    for (const auto& iv : mine) {
                        if (iv.start <= p && p < iv.end) used += iv.tokens;
                    }
                    peak = std::max(peak, used);
                }
                if (peak + m <= cap) ++missed_throws;
            }
            // Check every boundary of every admitted interval.
            for (const auto& iv : mine) {
                for (Seconds b : {iv.start, iv.end}) {
                    Tokens used = 0;
                    for (const auto& jv : mine) {
                        if (jv.start <= b && b < jv.end) used += jv.tokens;
                    }
                    if (used > cap) ++violations;
                }
            }
        }
    }
    return {violations == 0 && missed_throws == 0 && admitted > 0 && rejected > 0,
            "10000 sequences, admitted=" + std::to_string(admitted) + ", refused=" + std::to_string(rejected) +
                ", violations=" + std::to_string(violations) + ", unjustified refusals=" +
                std::to_string(missed_throws)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome ac4() {
    const auto base = fs::temp_directory_path() / "agentsim_ac4";
    fs::remove_all(base);
    auto cfg_for = [&](const char* sub, bool wall) {
        RunConfig cfg;
        cfg.trace = kRoot / "data" / "mixed.jsonl";
        cfg.cluster = kRoot / "configs" / "hetero1.json";
        cfg.out = base / sub;
        cfg.wallclock = wall;
        return cfg;
    };
    std::ostringstream out, err;
    int rc = 0;
    rc |= cmd_run(cfg_for("a", false), out, err);
    rc |= cmd_run(cfg_for("b", false), out, err);
    rc |= cmd_run(cfg_for("w", true), out, err);
    if (rc != 0) return {false, "cmd_run failed: " + err.str()};
    int differing = 0;
    for (const char* f : {"calls.csv", "workflows.csv", "planner.csv", "curve.csv", "summary.csv"}) {
        const auto a = slurp(base / "a" / f);
        if (a.empty() || a != slurp(base / "b" / f)) ++differing;
    }
    // Wall-clock timing only feeds planner/summary; the schedule itself is unaffected.
    int wall_differing = 0;
    for (const char* f : {"calls.csv", "workflows.csv", "curve.csv"}) {
        if (slurp(base / "a" / f) != slurp(base / "w" / f)) ++wall_differing;
    }
    fs::remove_all(base);
    return {differing == 0 && wall_differing == 0,
            "5 CSVs byte-identical across runs (differing=" + std::to_string(differing) +
                "), schedule CSVs identical with wall-clock timing on (differing=" + std::to_string(wall_differing) +
                ")"};
}

Outcome ac5() {
    const auto t0 = Clock::now();
    auto c = load_cluster("hetero1.json");
    auto t = load_trace("mixed.jsonl");
    auto call = note("mixed/fcfs-call", simulate(t, c, PolicyKind::PerCallFCFS));
    auto wf = note("mixed/fcfs-wf", simulate(t, c, PolicyKind::WorkflowFCFS));
    auto hex = note("mixed/hexagent", simulate(t, c, PolicyKind::HexAGenT));
    const double cut = 100.0 * (wf.req99 - hex.req99) / wf.req99;
    const double secs = seconds_since(t0);
    const bool ok = wf.req95 <= call.req95 && hex.req95 <= wf.req95 && cut >= 20.0 && secs < 120.0;
    return {ok, "Req95 fcfs-call=" + fmt(call.req95) + " fcfs-wf=" + fmt(wf.req95) + " hexagent=" + fmt(hex.req95) +
                    "; Req99 fcfs-wf=" + fmt(wf.req99) + " hexagent=" + fmt(hex.req99) + " (-" + fmt(cut, 1) +
                    "%), " + fmt(secs, 1) + " s"};
}

Outcome ac6() {
    auto c = load_cluster("homo4.json");
    auto t = load_trace("chain.jsonl");
    auto hex = note("chain-homo4/hexagent", simulate(t, c, PolicyKind::HexAGenT));
    double best = std::numeric_limits<double>::infinity();
    std::string best_name;
    for (auto k : {PolicyKind::PerCallFCFS, PolicyKind::WorkflowFCFS, PolicyKind::WorkflowLLF,
                   PolicyKind::AttainedService}) {
        const std::string name(policy_name(k));
        auto q = note("chain-homo4/" + name, simulate(t, c, k));
        if (q.req99 < best) {
            best = q.req99;
            best_name = name;
        }
    }
    const double cut = 100.0 * (best - hex.req99) / best;
    return {hex.req99 <= best && cut >= 10.0, "Req99 hexagent=" + fmt(hex.req99) + " best baseline " + best_name +
                                                  "=" + fmt(best) + " (-" + fmt(cut, 1) + "%)"};
}

Outcome ac7() {
    auto c = load_cluster("hetero1.json");
    auto t = load_trace("chain.jsonl");
    auto base = note("chain-hetero1/hexagent", simulate(t, c, PolicyKind::HexAGenT));
    auto noisy = note("chain-hetero1/hexagent eps=0.3", simulate(t, c, PolicyKind::HexAGenT, 0.3));
    auto d = degradation(base, noisy);
    return {d.req99 <= 15.0, "Req99 " + fmt(base.req99) + " -> " + fmt(noisy.req99) + " (" + fmt(d.req99, 1) +
                                 "%), Req95 " + fmt(d.req95, 1) + "%"};
}

Outcome ac8() {
    // Live run on the 20-instance cluster, then a synthetic worst case with a
    // full 200-call queue.
    auto c = load_cluster("hetero2.json");
    auto t = load_trace("mixed.jsonl");
    auto r = simulate(t, c, PolicyKind::HexAGenT, 0.0, true);
    std::vector<PlannerRecord> bounded;
    std::size_t max_q = 0;
    for (const auto& p : r.planner) {
        max_q = std::max(max_q, p.queue_len);
        if (p.queue_len <= 200) bounded.push_back(p);
    }
    auto live = overhead_summary(bounded);

    Estimator est(c);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<Tokens> in(200, 2000), out(20, 600);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<PlannerRecord> synth;
    for (int rep = 0; rep < 20; ++rep) {
        for (Stage stage : {Stage::Prefill, Stage::Decode}) {
            auto s = idle_snapshot(c, stage, 10.0);
            for (InstanceId p : c.prefill_instances()) s.prefill_free[static_cast<std::size_t>(p)] = 10.0 + u(rng);
            for (InstanceId d : c.decode_instances()) {
                s.decode_running[static_cast<std::size_t>(d)].insert({10.0, 10.0 + u(rng), 8000});
            }
            s.decode_hint = s.decode_running;
            for (CallId i = 0; i < 200; ++i) {
                auto& w = add_waiting(s, i, i / 4, 10.0 - u(rng), 1.0 + u(rng), in(rng), out(rng));
                if (stage == Stage::Decode) {
                    w.decode_instance = c.decode_instances()[static_cast<std::size_t>(i) % 10];
                    w.decode_locked = true;
                }
            }
            const auto a = Clock::now();
            auto plan = make_plan(s, est, {});
            PlannerRecord rec;
            rec.queue_len = plan.entries.size();
            rec.wall_us = std::chrono::duration<double, std::micro>(Clock::now() - a).count();
            synth.push_back(rec);
        }
    }
    auto worst = overhead_summary(synth);
    const bool ok = live.mean_ms <= 25.0 && worst.mean_ms <= 25.0;
    return {ok, "hetero-2 live: " + std::to_string(live.invocations) + " inv, mean " + fmt(live.mean_ms, 3) +
                    " ms, max queue " + std::to_string(max_q) + "; synthetic |Q|=200: mean " + fmt(worst.mean_ms, 3) +
                    " ms, max " + fmt(worst.max_ms, 3) + " ms"};
}

Outcome ac9() {
    int ordering = 0, attainment = 0;
    for (std::size_t i = 0; i < g_runs.size(); ++i) {
        const auto& q = g_runs[i].second;
        if (q.req99 < q.req95) ++ordering;
        const double alphas[] = {q.req95};
        if (attainment_curve(g_ratios[i], alphas)[0].fraction < 0.95) ++attainment;
    }
    // Scaling every horizon by the same factor scales every risk by its inverse.
    auto c = load_cluster("hetero1.json");
    Estimator est(c);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> n(1, 40);
    std::uniform_int_distribution<Tokens> len(50, 2000);
    std::uniform_real_distribution<double> u(0.0, 4.0), scale(0.05, 20.0);
    int changed = 0;
    for (int i = 0; i < 100; ++i) {
        const Stage stage = i % 2 == 0 ? Stage::Prefill : Stage::Decode;
        auto s = idle_snapshot(c, stage, 5.0);
        for (InstanceId p : c.prefill_instances()) s.prefill_free[static_cast<std::size_t>(p)] = 5.0 + u(rng);
        const int k = n(rng);
        for (CallId j = 0; j < k; ++j) add_waiting(s, j, j, 5.0 - u(rng), 0.5 + u(rng), len(rng), len(rng) / 4);
        auto scaled = s;
        const double f = scale(rng);
        for (auto& w : scaled.waiting) w.horizon *= f;
        for (auto& [id, v] : scaled.workflows) v.horizon *= f;
        auto a = make_plan(s, est, {});
        auto b = make_plan(scaled, est, {});
        if (a.entries.empty() || b.entries.empty() || a.entries[0].call != b.entries[0].call ||
            a.entries[0].prefill_instance != b.entries[0].prefill_instance ||
            a.entries[0].decode_instance != b.entries[0].decode_instance) {
            ++changed;
        }
    }
    return {ordering == 0 && attainment == 0 && changed == 0 && !g_runs.empty(),
            std::to_string(g_runs.size()) + " runs: Req99<Req95 in " + std::to_string(ordering) +
                ", attainment(Req95)<0.95 in " + std::to_string(attainment) +
                "; scale-invariance changed first pick in " + std::to_string(changed) + "/100 snapshots"};
}

Outcome ac10() {
    // 1P+1D, prefill 1 s. wf0 at 0 starts at once under fallback before its
    // plan lands; wf1 at 0.02 waits behind it on a fallback key until the
    // follow-up plan re-ranks it.
    auto c = unit_cluster(1.0, 1.0, 0.0);
    auto t = trace_of({{0.0, {{}}}, {0.02, {{}}}});
    PolicyConfig p;
    SimConfig cfg;
    cfg.planning_latency = 0.05;
    cfg.measure_wallclock = false;
    Simulator sim(t, c, p, cfg);

    std::size_t max_in_flight = 0;
    bool stale_seen = false, reranked = false, fallback_seen = false;
    while (sim.next_event_time() && *sim.next_event_time() < 0.2) {
        sim.step();
        max_in_flight = std::max(max_in_flight, sim.plan_in_flight(Stage::Prefill) ? std::size_t{1} : 0);
        if (sim.call(1).state == CallState::WaitingPrefill && sim.queue_key(1).tier == 1 &&
            sim.call(1).prefill_instance) {
            fallback_seen = true;
        }
        if (fallback_seen && sim.call(1).state == CallState::WaitingPrefill && sim.queue_key(1).tier == 0) {
            reranked = true;
        }
    }
    const auto& recs = sim.planner_records();
    for (const auto& r : recs) {
        if (r.plan_id == 1 && r.stale == 1 && r.applied == 0) stale_seen = true;
    }
    // Plans of one stage must not overlap in simulated time.
    bool overlap = false;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (recs[i].stage == recs[j].stage && recs[i].time < recs[j].time + recs[j].sim_latency) overlap = true;
        }
    }
    while (sim.step()) {
    }
    auto r = sim.result();
    const bool ok = max_in_flight <= 1 && r.max_in_flight_plans <= 1 && !overlap && stale_seen && fallback_seen &&
                    reranked && sim.call(1).state == CallState::Complete;
    return {ok, "max in flight=" + std::to_string(r.max_in_flight_plans) + ", overlapping plans=" +
                    (overlap ? "yes" : "no") + ", stale on started call=" + (stale_seen ? "yes" : "no") +
                    ", fallback then re-ranked=" + (fallback_seen && reranked ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> checks[] = {
        {"AC1 engine oracle equivalence", ac1}, {"AC2 horizon oracle", ac2},
        {"AC3 capacity fuzz", ac3},             {"AC4 determinism", ac4},
        {"AC5 mixed hetero-1 direction", ac5},  {"AC6 homogeneous benefit", ac6},
        {"AC7 robustness eps=0.3", ac7},        {"AC8 planning overhead", ac8},
        {"AC9 metric properties", ac9},         {"AC10 plan application", ac10},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
