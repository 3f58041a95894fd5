#include "agentsim/horizon.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "agentsim/errors.hpp"
#include "agentsim/ledger.hpp"

namespace agentsim {

IsolatedSchedule isolated_schedule(std::span<const CallId> subgraph, const Trace& trace, const Estimator& est,
                                   std::span<const Tokens> output_lens,
                                   const std::map<CallId, ObservedDurations>* observed) {
    const auto& cluster = est.cluster();
    const auto prefill_ids = cluster.prefill_instances();
    const auto decode_ids = cluster.decode_instances();

    std::vector<CallId> order(subgraph.begin(), subgraph.end());
    std::sort(order.begin(), order.end(), [&](CallId a, CallId b) {
        const auto& ca = trace.call(a);
        const auto& cb = trace.call(b);
        if (ca.workflow != cb.workflow) {
            return ca.workflow < cb.workflow;
        }
        return ca.topo_index < cb.topo_index;
    });

    std::vector<Seconds> prefill_free(cluster.instances.size(), 0.0);
    std::vector<DecodeCapacityLedger> ledgers;
    ledgers.reserve(cluster.instances.size());
    for (const auto& inst : cluster.instances) {
        ledgers.emplace_back(inst.kv_capacity);
    }
    std::unordered_map<CallId, Seconds> finish;

    IsolatedSchedule out;
    out.placements.reserve(order.size());
    for (auto id : order) {
        const auto& call = trace.call(id);
        // Tool delay only counts behind a parent that is part of this schedule.
        Seconds ready = 0.0;
        bool behind_parent = false;
        for (auto p : call.parents) {
            if (auto it = finish.find(p); it != finish.end()) {
                ready = std::max(ready, it->second);
                behind_parent = true;
            }
        }
        if (behind_parent) {
            ready += call.reveal_delay;
        }
        const Tokens out_len = output_lens[static_cast<std::size_t>(id)];
        const Tokens demand = decode_demand(call.input_len, out_len);
        const ObservedDurations* seen = nullptr;
        if (observed != nullptr) {
            if (auto it = observed->find(id); it != observed->end()) {
                seen = &it->second;
            }
        }

        IsolatedPlacement best;
        best.decode_end = std::numeric_limits<Seconds>::infinity();
        bool found = false;
        for (auto p : prefill_ids) {
            const Seconds pre = seen ? seen->prefill : est.clean_prefill(call.input_len, p);
            const Seconds ps = std::max(ready, prefill_free[static_cast<std::size_t>(p)]);
            const Seconds pe = ps + pre;
            for (auto d : decode_ids) {
                const auto& ledger = ledgers[static_cast<std::size_t>(d)];
                if (demand > ledger.capacity()) {
                    continue;
                }
                const Seconds xfer = seen ? seen->transfer : est.transfer(call.input_len, p, d);
                const Seconds dec = seen ? seen->decode : est.clean_decode(out_len, d);
                const Seconds ds = ledger.earliest_feasible_start(demand, dec, pe + xfer);
                const Seconds de = ds + dec;
                if (de < best.decode_end) {
                    best = {id, p, d, ps, pe, ds, de};
                    found = true;
                }
            }
        }
        if (!found) {
            throw NoFeasibleDecode(id);
        }
        prefill_free[static_cast<std::size_t>(best.prefill)] = best.prefill_end;
        ledgers[static_cast<std::size_t>(best.decode)].insert({best.decode_start, best.decode_end, demand});
        finish[id] = best.decode_end;
        out.makespan = std::max(out.makespan, best.decode_end);
        out.placements.push_back(best);
    }
    return out;
}

Seconds standalone_horizon(std::span<const CallId> subgraph, const Trace& trace, const Estimator& est,
                           std::span<const Tokens> output_lens, const std::map<CallId, ObservedDurations>* observed) {
    return isolated_schedule(subgraph, trace, est, output_lens, observed).makespan;
}

Seconds refine_on_reveal(HorizonRecord& record, std::span<const CallId> revealed, const Trace& trace,
                         const Estimator& est, std::span<const Tokens> output_lens, bool use_observed) {
    record.horizon = standalone_horizon(revealed, trace, est, output_lens, use_observed ? &record.observed : nullptr);
    return record.horizon;
}

std::vector<Tokens> true_output_lengths(const Trace& trace) {
    std::vector<Tokens> out(trace.calls.size());
    for (const auto& c : trace.calls) {
        out[static_cast<std::size_t>(c.id)] = c.output_len;
    }
    return out;
}

Seconds metrics_horizon(const Trace& trace, WorkflowId workflow, const Estimator& est) {
    const auto lens = true_output_lengths(trace);
    return standalone_horizon(trace.workflow(workflow).calls, trace, est, lens, nullptr);
}

}  // namespace agentsim
