#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "agentsim/cluster.hpp"
#include "agentsim/core.hpp"
#include "agentsim/horizon.hpp"
#include "agentsim/latency.hpp"
#include "agentsim/ledger.hpp"
#include "agentsim/plan.hpp"
#include "agentsim/policy.hpp"

namespace agentsim {

struct SimConfig {
    // Simulated time between a planner invocation and its plan landing. Zero
    // applies plans synchronously.
    Seconds planning_latency = 0.010;
    // Delay between a call's first prefill assignment and it joining the queue.
    Seconds bootstrap_latency = 0.0;
    ErrorConfig est_error;
    PredictorConfig predictor;
    bool refine_with_observed = true;
    bool measure_wallclock = true;
    bool record_events = false;
    bool record_horizons = false;
};

enum class EventKind {
    WorkflowArrival,
    CallReveal,
    BootstrapComplete,
    PrefillStart,
    PrefillComplete,
    TransferComplete,
    DecodeStart,
    DecodeComplete,
    PlanReady,
};

std::string_view to_string(EventKind k);

// Equal-time events run completions first, then arrivals/reveals, then plan landings.
int kind_priority(EventKind k);

struct SimEvent {
    Seconds time = 0.0;
    EventKind kind = EventKind::WorkflowArrival;
    std::int64_t subject = 0;  // call, workflow or plan id
    std::uint64_t sequence = 0;
};

// Stages whose planner an event wakes. `reveals_children` tells a
// DecodeComplete apart from one that only frees capacity.
std::set<Stage> trigger_stages(const SimEvent& event, bool reveals_children = false);

enum class ApplyOutcome { Applied, StaleIgnored };

struct PlannerRecord {
    std::uint64_t plan_id = 0;
    Seconds time = 0.0;
    Stage stage = Stage::Prefill;
    std::size_t queue_len = 0;
    double wall_us = 0.0;
    Seconds sim_latency = 0.0;
    std::size_t applied = 0;
    std::size_t stale = 0;
};

struct WorkflowOutcome {
    WorkflowId id = 0;
    Seconds arrival = 0.0;
    Seconds completion = 0.0;      // C_w, absolute time
    Seconds horizon = 0.0;         // H_w for metrics
    Seconds online_horizon = 0.0;  // last H_w(t) the planner saw
    Seconds latency() const { return completion - arrival; }
    double ratio() const { return latency() / horizon; }
};

struct EventLogEntry {
    Seconds time = 0.0;
    EventKind kind = EventKind::WorkflowArrival;
    std::int64_t subject = 0;
    bool operator==(const EventLogEntry&) const = default;
};

struct HorizonSample {
    WorkflowId workflow = 0;
    Seconds time = 0.0;
    Seconds horizon = 0.0;
};

struct SimResult {
    std::string policy;
    std::vector<CallNode> calls;
    std::vector<WorkflowOutcome> workflows;
    std::vector<PlannerRecord> planner;
    std::vector<EventLogEntry> events;
    std::vector<HorizonSample> horizons;
    std::size_t fallback_assignments = 0;
    std::size_t max_in_flight_plans = 0;
};

class Simulator {
public:
    Simulator(const Trace& trace, const ClusterSpec& cluster, PolicyConfig policy, SimConfig cfg);

    // Runs to quiescence. Throws DeadlockDetected if calls remain incomplete.
    SimResult run();

    // Step-level access for scripted scenarios.
    bool step();
    bool idle() const { return events_.empty(); }
    Seconds now() const { return now_; }
    std::optional<Seconds> next_event_time() const;
    const CallNode& call(CallId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const WorkflowState& workflow(WorkflowId id) const { return workflows_.at(static_cast<std::size_t>(id)); }
    std::uint64_t revision(CallId id) const { return revision_.at(static_cast<std::size_t>(id)); }
    const QueueKey& queue_key(CallId id) const { return key_.at(static_cast<std::size_t>(id)); }
    bool plan_in_flight(Stage s) const { return in_flight_[stage_index(s)].has_value(); }
    const std::optional<SchedulePlan>& in_flight_plan(Stage s) const { return in_flight_[stage_index(s)]; }
    const std::vector<PlannerRecord>& planner_records() const { return planner_; }
    const DecodeCapacityLedger& decode_ledger(InstanceId d) const { return ledgers_.at(static_cast<std::size_t>(d)); }
    const std::vector<ApplyOutcome>& last_apply_outcomes() const { return last_outcomes_; }
    std::size_t fallback_assignments() const { return fallback_count_; }

    StageSnapshot snapshot(Stage stage) const;

    // Applies entries whose call still waits at the plan's stage with an
    // unchanged revision; the rest are StaleIgnored.
    std::vector<ApplyOutcome> apply_plan(const SchedulePlan& plan);

    SimResult result() const;

private:
    static constexpr std::size_t stage_index(Stage s) { return s == Stage::Prefill ? 0 : 1; }

    struct QueueOrder {
        bool operator()(const SimEvent& a, const SimEvent& b) const;
    };

    void schedule(Seconds time, EventKind kind, std::int64_t subject);
    void log(Seconds time, EventKind kind, std::int64_t subject);
    void handle(const SimEvent& e, std::set<Stage>& triggers);
    void on_trigger(Stage stage);
    void launch_plan(Stage stage);
    void run_fallback(Stage stage);
    void dispatch();
    void start_prefill(CallId c, InstanceId p);
    void start_decode_call(CallId c, InstanceId d);
    void refresh_horizon(WorkflowId w);
    void enter(CallNode& node, CallState s);
    void assign_prefill(CallId c, InstanceId p, InstanceId d);
    std::set<CallId>& waiting(Stage s) { return waiting_[stage_index(s)]; }
    const std::set<CallId>& waiting(Stage s) const { return waiting_[stage_index(s)]; }
    Seconds remaining_path(WorkflowId w) const;
    Seconds attained(WorkflowId w) const;

    const Trace* trace_;
    const ClusterSpec* cluster_;
    PolicyConfig policy_;
    SimConfig cfg_;
    Estimator est_;
    Estimator clean_est_;

    std::vector<CallNode> nodes_;
    std::vector<WorkflowState> workflows_;
    std::vector<HorizonRecord> horizons_;
    std::vector<Tokens> predicted_;
    std::vector<std::uint64_t> revision_;
    std::vector<QueueKey> key_;
    std::vector<Seconds> bootstrap_ready_;
    std::vector<Seconds> prefill_duration_;
    std::vector<Seconds> transfer_duration_;
    std::vector<Seconds> decode_duration_;

    std::vector<std::optional<CallId>> prefill_running_;
    std::vector<std::vector<CallId>> decode_running_;
    std::vector<DecodeCapacityLedger> ledgers_;
    std::array<std::set<CallId>, 2> waiting_;
    std::vector<Seconds> executed_;  // per workflow, finished prefill+decode seconds

    std::priority_queue<SimEvent, std::vector<SimEvent>, QueueOrder> events_;
    std::uint64_t sequence_ = 0;
    Seconds now_ = 0.0;
    std::size_t completed_calls_ = 0;

    std::array<std::optional<SchedulePlan>, 2> in_flight_;
    std::array<bool, 2> pending_trigger_{false, false};
    std::uint64_t next_plan_id_ = 1;
    std::size_t max_in_flight_ = 0;
    std::size_t fallback_count_ = 0;

    std::vector<PlannerRecord> planner_;
    std::vector<EventLogEntry> log_;
    std::vector<HorizonSample> horizon_log_;
    std::vector<ApplyOutcome> last_outcomes_;
};

SimResult run(const Trace& trace, const ClusterSpec& cluster, const PolicyConfig& policy, const SimConfig& cfg);

// Per-workflow H_w with true lengths and error-free estimates.
std::vector<Seconds> metrics_horizons(const Trace& trace, const ClusterSpec& cluster);

}  // namespace agentsim
