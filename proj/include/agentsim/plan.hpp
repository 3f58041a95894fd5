#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "agentsim/core.hpp"
#include "agentsim/ledger.hpp"

namespace agentsim {

// Ordering key of a waiting call inside its instance queue; smaller runs
// first. Tier 0 carries the rank from the latest applied plan; tier 1 is the
// workflow-FCFS order used for fallback-assigned calls.
struct QueueKey {
    int tier = 1;
    std::int64_t rank = 0;
    Seconds arrival = 0.0;
    WorkflowId workflow = 0;
    int topo_index = 0;
    CallId call = 0;

    auto operator<=>(const QueueKey&) const = default;
};

QueueKey fallback_key(Seconds arrival, WorkflowId workflow, int topo_index, CallId call);

struct PlanEntry {
    CallId call = 0;
    InstanceId prefill_instance = -1;
    InstanceId decode_instance = -1;
    int rank = 0;  // 1-based within the target instance queue of the plan's stage
    std::uint64_t revision = 0;
};

struct SchedulePlan {
    std::uint64_t id = 0;
    Stage stage = Stage::Prefill;
    Seconds created_at = 0.0;
    Seconds planning_latency = 0.0;
    std::vector<PlanEntry> entries;  // in selection order
    std::vector<CallId> infeasible;  // NoFeasibleDecode; left waiting
};

// One waiting call as the scheduler sees it.
struct WaitingCall {
    CallId call = 0;
    WorkflowId workflow = 0;
    Seconds arrival = 0.0;       // a_w
    Seconds horizon = 0.0;       // H_w(t)
    Tokens input_len = 1;
    Tokens predicted_output = 1;  // L̂_out
    Seconds revealed_at = 0.0;
    Seconds ready_at = 0.0;  // earliest service start (bootstrap / transfer done)
    int topo_index = 0;
    std::optional<InstanceId> prefill_instance;
    std::optional<InstanceId> decode_instance;
    bool decode_locked = false;
    std::uint64_t revision = 0;

    Tokens demand() const { return input_len + predicted_output; }
};

struct WorkflowView {
    WorkflowId id = 0;
    Seconds arrival = 0.0;
    Seconds horizon = 0.0;
    Seconds attained = 0.0;        // executed prefill+decode seconds so far
    Seconds remaining_path = 0.0;  // error-free estimate of remaining critical path
};

// Immutable view of the runtime handed to a planner. Per-instance vectors are
// indexed by instance id; entries for the other pool are unused.
struct StageSnapshot {
    Seconds now = 0.0;
    Stage stage = Stage::Prefill;
    std::vector<WaitingCall> waiting;  // ascending call id
    std::unordered_map<WorkflowId, WorkflowView> workflows;

    // Estimated time each prefill instance finishes its running call (>= now).
    std::vector<Seconds> prefill_free;
    // Estimated work of calls already assigned to and waiting on each prefill instance.
    std::vector<Seconds> prefill_queued;
    // Running decodes only, clamped to start at `now` with estimated ends.
    std::vector<DecodeCapacityLedger> decode_running;
    // Running decodes plus projected intervals of calls already heading to
    // each decode instance (in prefill, transfer or waiting for decode).
    std::vector<DecodeCapacityLedger> decode_hint;
    // Estimated outstanding decode work per instance, for load balancing.
    std::vector<Seconds> decode_outstanding;

    const WorkflowView& workflow(WorkflowId id) const { return workflows.at(id); }
};

}  // namespace agentsim
