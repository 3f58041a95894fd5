#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentsim {

using CallId = std::int32_t;
using WorkflowId = std::int32_t;
using InstanceId = std::int32_t;
using Tokens = std::int64_t;
using Seconds = double;

inline constexpr Seconds kUnset = std::numeric_limits<Seconds>::quiet_NaN();

enum class Stage { Prefill, Decode };

// Hidden is the pre-reveal state; everything after it is the call lifecycle.
enum class CallState { Hidden, WaitingPrefill, Prefill, Transfer, WaitingDecode, Decode, Complete };

inline constexpr std::size_t kLifecycleStates = 6;

std::string_view to_string(Stage s);
std::string_view to_string(CallState s);

// Index into CallNode::entered for a lifecycle state (Hidden has none).
constexpr std::size_t lifecycle_index(CallState s) { return static_cast<std::size_t>(s) - 1; }

// ---------------------------------------------------------------------------
// Raw trace records, as read from a trace file. Ids are whatever the file
// says; build_trace() renumbers them densely in trace order.

struct CallRecord {
    std::int64_t call_id = 0;
    std::vector<std::int64_t> parents;
    Tokens input_len = 0;
    Tokens output_len = 0;
    Seconds reveal_delay = 0.0;
};

struct WorkflowRecord {
    std::int64_t workflow_id = 0;
    std::optional<Seconds> arrival;
    std::vector<CallRecord> calls;
};

using TraceRecords = std::vector<WorkflowRecord>;

struct Violation {
    enum class Kind { CycleDetected, DanglingParent, NonPositiveLength, MissingArrival, DuplicateId };
    Kind kind;
    std::int64_t subject;  // workflow id for cycle/arrival, call id otherwise
    std::string message;
};

std::string_view to_string(Violation::Kind k);

// Empty result means the trace is valid.
std::vector<Violation> validate_trace(const TraceRecords& records);

// ---------------------------------------------------------------------------
// Validated, densely numbered trace.

struct CallSpec {
    CallId id = 0;
    WorkflowId workflow = 0;
    std::vector<CallId> parents;
    std::vector<CallId> children;
    Tokens input_len = 1;
    Tokens output_len = 1;
    // Tool latency between the last parent finishing and this call appearing.
    Seconds reveal_delay = 0.0;
    // Position in the workflow's deterministic topological order.
    int topo_index = 0;
    std::int64_t source_id = 0;
};

struct WorkflowSpec {
    WorkflowId id = 0;
    Seconds arrival = 0.0;
    std::vector<CallId> calls;  // topological order, ties by id
    std::vector<CallId> sources;
    std::int64_t source_id = 0;
};

struct Trace {
    std::vector<WorkflowSpec> workflows;
    std::vector<CallSpec> calls;

    const CallSpec& call(CallId id) const { return calls.at(static_cast<std::size_t>(id)); }
    const WorkflowSpec& workflow(WorkflowId id) const { return workflows.at(static_cast<std::size_t>(id)); }
    bool empty() const { return workflows.empty(); }
};

// Throws TraceError listing every violation when the records are invalid.
Trace build_trace(const TraceRecords& records);

TraceRecords to_records(const Trace& trace);

// ---------------------------------------------------------------------------
// Runtime state.

struct CallNode {
    CallId id = 0;
    WorkflowId workflow = 0;
    Tokens predicted_output_len = 1;
    CallState state = CallState::Hidden;
    std::optional<InstanceId> prefill_instance;
    std::optional<InstanceId> decode_instance;
    bool decode_locked = false;
    std::array<Seconds, kLifecycleStates> entered{kUnset, kUnset, kUnset, kUnset, kUnset, kUnset};

    Seconds entered_at(CallState s) const { return entered[lifecycle_index(s)]; }
};

struct WorkflowState {
    WorkflowId id = 0;
    Seconds arrival = 0.0;
    std::set<CallId> revealed;
    std::set<CallId> completed;
    Seconds horizon = 0.0;
    Seconds final_horizon = 0.0;
    std::optional<Seconds> completion;
};

std::vector<CallNode> make_call_nodes(const Trace& trace);
WorkflowState make_workflow_state(const WorkflowSpec& wf);

// Moves a hidden call to WaitingPrefill and records it as revealed.
void reveal_call(WorkflowState& w, CallNode& node, Seconds now);

// Reveals the workflow's source calls; returns them in id order.
std::vector<CallId> reveal_sources(WorkflowState& w, const Trace& trace, std::span<CallNode> nodes, Seconds now);

// Children of `completed_call` whose parents are all complete and which are
// not yet revealed. Pure; does not change state. Throws UnknownCall.
std::vector<CallId> unblocked_children(const WorkflowState& w, CallId completed_call, const Trace& trace);

// unblocked_children() plus revealing each returned call.
std::vector<CallId> reveal_children(WorkflowState& w, CallId completed_call, const Trace& trace,
                                    std::span<CallNode> nodes, Seconds now);

// Revealed calls still waiting for prefill.
std::set<CallId> runnable_frontier(const WorkflowState& w, std::span<const CallNode> nodes);

}  // namespace agentsim
