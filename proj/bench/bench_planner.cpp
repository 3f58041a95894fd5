// Serial vs OpenMP candidate scoring, and the full prefill planner on top of each.
#include <benchmark/benchmark.h>

#include <numeric>

#include "agentsim/io.hpp"
#include "agentsim/planning.hpp"
#include "agentsim/policy.hpp"

using namespace agentsim;

namespace {

const ClusterSpec& cluster() {
    static const ClusterSpec c = read_cluster(AGENTSIM_SOURCE_DIR "/configs/hetero1.json");
    return c;
}

StageSnapshot make_snapshot(std::size_t n) {
    const auto& c = cluster();
    StageSnapshot s;
    s.now = 10.0;
    s.stage = Stage::Prefill;
    for (std::size_t i = 0; i < n; ++i) {
        WaitingCall w;
        w.call = static_cast<CallId>(i);
        w.workflow = static_cast<WorkflowId>(i / 3);
        w.arrival = 10.0 - 0.01 * static_cast<double>(i % 97);
        w.horizon = 5.0 + static_cast<double>(i % 13);
        w.input_len = 200 + static_cast<Tokens>((i * 7919) % 1800);
        w.predicted_output = 20 + static_cast<Tokens>((i * 104729) % 580);
        w.ready_at = s.now;
        s.waiting.push_back(w);
        s.workflows.try_emplace(w.workflow, WorkflowView{w.workflow, w.arrival, w.horizon, 0.0, 1.0});
    }
    s.prefill_free.assign(c.instances.size(), s.now);
    s.prefill_queued.assign(c.instances.size(), 0.0);
    s.decode_outstanding.assign(c.instances.size(), 0.0);
    for (const auto& inst : c.instances) {
        s.decode_running.emplace_back(inst.pool == Pool::Decode ? inst.kv_capacity : 0);
    }
    // Some running load so the capacity walk has segments to step over.
    for (const auto& inst : c.instances) {
        if (inst.pool != Pool::Decode) continue;
        auto& l = s.decode_running[static_cast<std::size_t>(inst.id)];
        for (int k = 0; k < 8; ++k) {
            l.insert({s.now, s.now + 1.0 + k, inst.kv_capacity / 10});
        }
    }
    s.decode_hint = s.decode_running;
    return s;
}

void score(benchmark::State& st, KernelMode mode) {
    const auto snap = make_snapshot(static_cast<std::size_t>(st.range(0)));
    const Estimator est(cluster(), {});
    const auto state = PlanningState::for_prefill(snap, true);
    std::vector<std::size_t> which(snap.waiting.size());
    std::iota(which.begin(), which.end(), 0);
    std::vector<PairChoice> out(snap.waiting.size());
    for (auto _ : st) {
        score_candidates(mode, Stage::Prefill, snap.waiting, which, state, est, snap.now, out);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void plan(benchmark::State& st, KernelMode mode) {
    const auto snap = make_snapshot(static_cast<std::size_t>(st.range(0)));
    const Estimator est(cluster(), {});
    PolicyConfig cfg;
    cfg.kernel = mode;
    for (auto _ : st) {
        auto p = plan_prefill_hexagent(snap, est, cfg);
        benchmark::DoNotOptimize(p.entries.data());
    }
}

void BM_ScoreSerial(benchmark::State& st) { score(st, KernelMode::Serial); }
void BM_ScoreParallel(benchmark::State& st) { score(st, KernelMode::Parallel); }
void BM_PlanSerial(benchmark::State& st) { plan(st, KernelMode::Serial); }
void BM_PlanParallel(benchmark::State& st) { plan(st, KernelMode::Parallel); }

}  // namespace

BENCHMARK(BM_ScoreSerial)->Arg(32)->Arg(200)->Arg(1000);
BENCHMARK(BM_ScoreParallel)->Arg(32)->Arg(200)->Arg(1000);
BENCHMARK(BM_PlanSerial)->Arg(64)->Arg(200);
BENCHMARK(BM_PlanParallel)->Arg(64)->Arg(200);

BENCHMARK_MAIN();
