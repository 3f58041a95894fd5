#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "agentsim/core.hpp"
#include "agentsim/latency.hpp"

namespace agentsim {

struct ObservedDurations {
    Seconds prefill = 0.0;
    Seconds transfer = 0.0;
    Seconds decode = 0.0;
};

struct HorizonRecord {
    WorkflowId workflow = 0;
    Seconds horizon = 0.0;
    // Filled in as calls complete; only completed calls are listed.
    std::map<CallId, ObservedDurations> observed;
    std::uint64_t last_recompute_event = 0;
};

// Where one call landed in an isolated schedule.
struct IsolatedPlacement {
    CallId call = 0;
    InstanceId prefill = 0;
    InstanceId decode = 0;
    Seconds prefill_start = 0.0;
    Seconds prefill_end = 0.0;
    Seconds decode_start = 0.0;
    Seconds decode_end = 0.0;
};

struct IsolatedSchedule {
    Seconds makespan = 0.0;
    std::vector<IsolatedPlacement> placements;  // in scheduling order
};

// Greedy earliest-finish list scheduling of `subgraph` alone on an empty
// cluster. Calls are taken in the trace's topological order; each goes to the
// (prefill, decode) pair with the earliest decode finish, ties to the lower
// prefill then decode id. Prefill instances are single servers, decode
// instances are bounded by their KV capacity. `output_lens` is indexed by
// call id (predicted lengths online, true lengths for metrics). Durations use
// the estimator's error-free path, or the observed values when present.
//
// Throws NoFeasibleDecode if a call fits no decode instance.
IsolatedSchedule isolated_schedule(std::span<const CallId> subgraph, const Trace& trace, const Estimator& est,
                                   std::span<const Tokens> output_lens,
                                   const std::map<CallId, ObservedDurations>* observed = nullptr);

Seconds standalone_horizon(std::span<const CallId> subgraph, const Trace& trace, const Estimator& est,
                           std::span<const Tokens> output_lens,
                           const std::map<CallId, ObservedDurations>* observed = nullptr);

// Recomputes record.horizon over the (grown) revealed subgraph and returns it.
Seconds refine_on_reveal(HorizonRecord& record, std::span<const CallId> revealed, const Trace& trace,
                         const Estimator& est, std::span<const Tokens> output_lens, bool use_observed = true);

// Full-DAG horizon with true output lengths and no observations: the H_w of
// the scaled-SLO metrics. Independent of the serving policy.
Seconds metrics_horizon(const Trace& trace, WorkflowId workflow, const Estimator& est);

std::vector<Tokens> true_output_lengths(const Trace& trace);

}  // namespace agentsim
