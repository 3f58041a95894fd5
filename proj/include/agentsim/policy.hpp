#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "agentsim/latency.hpp"
#include "agentsim/plan.hpp"
#include "agentsim/planning.hpp"

namespace agentsim {

enum class PolicyKind { HexAGenT, PerCallFCFS, WorkflowFCFS, WorkflowLLF, AttainedService };

struct PolicyConfig {
    PolicyKind kind = PolicyKind::HexAGenT;
    // Queues up to this size get the recomputing greedy; larger ones the
    // one-pass ordering.
    int greedy_threshold = 64;
    // LLF deadline is a_w + kappa * H_w(t).
    double llf_kappa = 1.0;
    KernelMode kernel = KernelMode::Parallel;
    // Only rescore calls whose best placement touched the instances the last
    // commit changed. Off gives the plain recompute-everything reference.
    bool incremental = true;
};

// CLI names: hexagent, fcfs-call, fcfs-wf, llf, atlas. Throws ConfigError("unknown policy ...").
PolicyKind parse_policy(std::string_view name);
std::string_view policy_name(PolicyKind kind);

struct ProjectedRisk {
    CallId call = 0;
    Stage stage = Stage::Prefill;
    Seconds delta = 0.0;
    double ratio = 0.0;
    InstanceId prefill_instance = -1;
    InstanceId decode_instance = -1;
};

// Risk of every feasible waiting call against the live snapshot.
std::vector<ProjectedRisk> projected_risks(const StageSnapshot& snap, const Estimator& est);

SchedulePlan plan_prefill_hexagent(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg);
SchedulePlan plan_decode_hexagent(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg);

// Baselines handle either stage; the snapshot says which.
SchedulePlan order_per_call_fcfs(const StageSnapshot& snap, const Estimator& est);
SchedulePlan order_workflow_fcfs(const StageSnapshot& snap, const Estimator& est);
SchedulePlan order_workflow_llf(const StageSnapshot& snap, const Estimator& est, double kappa);
SchedulePlan order_attained_service(const StageSnapshot& snap, const Estimator& est);

SchedulePlan make_plan(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg);

struct FallbackAssignment {
    CallId call = 0;
    InstanceId prefill_instance = -1;
    InstanceId decode_instance = -1;
    QueueKey key;
};

// Workflow-FCFS rank and the minimum projected finish pair. Throws NoFeasibleDecode.
FallbackAssignment fallback_assign(const WaitingCall& call, const StageSnapshot& snap, const Estimator& est);

// Assigns `calls` one after another in workflow-FCFS order, each seeing the
// load of those before it. Infeasible calls are skipped.
std::vector<FallbackAssignment> fallback_assign_all(std::span<const WaitingCall> calls, const StageSnapshot& snap,
                                                    const Estimator& est);

}  // namespace agentsim
