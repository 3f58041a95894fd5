#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "agentsim/cluster.hpp"
#include "agentsim/core.hpp"
#include "agentsim/ledger.hpp"
#include "agentsim/plan.hpp"

namespace agentsim::testing {

struct ClassSpec {
    std::string name;
    double prefill_s_per_token;
    double decode_s_per_token;
    Tokens kv_capacity;
};

// Table-mode cluster: prefill instances first, then decode, one entry per
// instance. Same-class bandwidth `bw_same`, cross-class `bw_cross`.
inline ClusterSpec table_cluster(const std::vector<ClassSpec>& prefill, const std::vector<ClassSpec>& decode,
                                 double kv_bytes_per_token = 1.0, double bw_same = 1e3, double bw_cross = 5e2,
                                 Seconds setup = 0.0) {
    ClusterSpec c;
    c.name = "test";
    c.transfer_setup = setup;
    c.model.mode = LatencyMode::Table;
    c.model.profile.kv_bytes_per_token = kv_bytes_per_token;
    InstanceId id = 0;
    auto add_class = [&](const ClassSpec& s) {
        c.model.classes[s.name] = {s.prefill_s_per_token, s.decode_s_per_token, 0.0, 0.0};
    };
    for (const auto& s : prefill) {
        add_class(s);
        c.instances.push_back({id++, Pool::Prefill, s.name, 0});
    }
    for (const auto& s : decode) {
        add_class(s);
        c.instances.push_back({id++, Pool::Decode, s.name, s.kv_capacity});
    }
    for (const auto& [a, _] : c.model.classes) {
        for (const auto& [b, __] : c.model.classes) {
            c.bandwidth[{a, b}] = a == b ? bw_same : bw_cross;
        }
    }
    return c;
}

// 1P+1D where prefill costs `p` s/token, decode `d` s/token and the KV of
// one input token transfers in `x` seconds.
inline ClusterSpec unit_cluster(double p = 1.0, double d = 1.0, double x = 0.0, Tokens cap = 1'000'000) {
    return table_cluster({{"G", p, d, cap}}, {{"G", p, d, cap}}, 1.0, x > 0.0 ? 1.0 / x : 1e300, 1e300);
}

struct CallDef {
    std::vector<int> parents;  // indices into the same workflow's call list
    Tokens in = 1;
    Tokens out = 1;
    Seconds delay = 0.0;
};

struct WorkflowDef {
    Seconds arrival = 0.0;
    std::vector<CallDef> calls;
};

inline TraceRecords records_of(const std::vector<WorkflowDef>& wfs) {
    TraceRecords r;
    std::int64_t next = 0;
    for (std::size_t w = 0; w < wfs.size(); ++w) {
        WorkflowRecord rec;
        rec.workflow_id = static_cast<std::int64_t>(w);
        rec.arrival = wfs[w].arrival;
        const auto base = next;
        for (const auto& c : wfs[w].calls) {
            CallRecord cr;
            cr.call_id = next++;
            for (int p : c.parents) cr.parents.push_back(base + p);
            cr.input_len = c.in;
            cr.output_len = c.out;
            cr.reveal_delay = c.delay;
            rec.calls.push_back(cr);
        }
        r.push_back(rec);
    }
    return r;
}

inline Trace trace_of(const std::vector<WorkflowDef>& wfs) { return build_trace(records_of(wfs)); }

// Random DAG over n nodes: each node after the first picks up to two
// earlier parents.
inline std::vector<CallDef> random_dag(std::mt19937_64& rng, int n, Tokens max_in, Tokens max_out,
                                       bool delays = false) {
    std::vector<CallDef> calls(static_cast<std::size_t>(n));
    std::uniform_int_distribution<Tokens> in(1, max_in);
    std::uniform_int_distribution<Tokens> out(1, max_out);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        auto& c = calls[static_cast<std::size_t>(i)];
        c.in = in(rng);
        c.out = out(rng);
        if (i > 0 && coin(rng) < 0.8) {
            std::uniform_int_distribution<int> pick(0, i - 1);
            const int a = pick(rng);
            c.parents.push_back(a);
            if (coin(rng) < 0.3) {
                const int b = pick(rng);
                if (b != a) c.parents.push_back(b);
            }
            if (delays && coin(rng) < 0.5) c.delay = coin(rng);
        }
    }
    return calls;
}

// Snapshot of an idle cluster at `now`.
inline StageSnapshot idle_snapshot(const ClusterSpec& c, Stage stage, Seconds now = 0.0) {
    StageSnapshot s;
    s.now = now;
    s.stage = stage;
    const auto n = c.instances.size();
    s.prefill_free.assign(n, now);
    s.prefill_queued.assign(n, 0.0);
    s.decode_outstanding.assign(n, 0.0);
    for (const auto& inst : c.instances) {
        s.decode_running.emplace_back(inst.kv_capacity);
        s.decode_hint.emplace_back(inst.kv_capacity);
    }
    return s;
}

// Adds a waiting call and its workflow view.
inline WaitingCall& add_waiting(StageSnapshot& s, CallId id, WorkflowId w, Seconds arrival, Seconds horizon,
                                Tokens in = 1, Tokens out = 1) {
    WaitingCall c;
    c.call = id;
    c.workflow = w;
    c.arrival = arrival;
    c.horizon = horizon;
    c.input_len = in;
    c.predicted_output = out;
    c.revealed_at = arrival;
    c.ready_at = s.now;
    c.topo_index = id;
    s.waiting.push_back(c);
    auto& v = s.workflows[w];
    v.id = w;
    v.arrival = arrival;
    v.horizon = horizon;
    return s.waiting.back();
}

}  // namespace agentsim::testing
