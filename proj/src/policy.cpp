#include "agentsim/policy.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <unordered_map>

#include "agentsim/errors.hpp"

namespace agentsim {

PolicyKind parse_policy(std::string_view name) {
    if (name == "hexagent") return PolicyKind::HexAGenT;
    if (name == "fcfs-call") return PolicyKind::PerCallFCFS;
    if (name == "fcfs-wf") return PolicyKind::WorkflowFCFS;
    if (name == "llf") return PolicyKind::WorkflowLLF;
    if (name == "atlas") return PolicyKind::AttainedService;
    throw ConfigError("unknown policy '" + std::string(name) + "' (expected hexagent|fcfs-call|fcfs-wf|llf|atlas)");
}

std::string_view policy_name(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::HexAGenT: return "hexagent";
    case PolicyKind::PerCallFCFS: return "fcfs-call";
    case PolicyKind::WorkflowFCFS: return "fcfs-wf";
    case PolicyKind::WorkflowLLF: return "llf";
    case PolicyKind::AttainedService: return "atlas";
    }
    return "?";
}

QueueKey fallback_key(Seconds arrival, WorkflowId workflow, int topo_index, CallId call) {
    return QueueKey{1, 0, arrival, workflow, topo_index, call};
}

namespace {

bool fits_somewhere(const WaitingCall& c, const Estimator& est) {
    for (const auto& d : est.cluster().instances) {
        if (d.pool == Pool::Decode && c.demand() <= d.kv_capacity) {
            return true;
        }
    }
    return false;
}

// Hands out 1-based ranks per target instance in commit order.
class RankCounter {
public:
    explicit RankCounter(std::size_t instances) : next_(instances, 0) {}
    int take(InstanceId id) { return ++next_[static_cast<std::size_t>(id)]; }

private:
    std::vector<int> next_;
};

PlanEntry make_entry(const WaitingCall& c, InstanceId p, InstanceId d, int rank) {
    return PlanEntry{c.call, p, d, rank, c.revision};
}

// Shared projected-risk planner for both stages.
SchedulePlan risk_plan(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg) {
    const Stage stage = snap.stage;
    const Seconds now = snap.now;
    const std::span<const WaitingCall> calls(snap.waiting);
    const std::size_t n = calls.size();

    SchedulePlan plan;
    plan.stage = stage;
    plan.created_at = now;

    PlanningState state = stage == Stage::Prefill ? PlanningState::for_prefill(snap, false)
                                                  : PlanningState::for_decode(snap);
    RankCounter ranks(est.cluster().instances.size());

    std::vector<std::size_t> remaining;
    remaining.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (fits_somewhere(calls[i], est) &&
            !(stage == Stage::Decode && calls[i].decode_locked && calls[i].decode_instance &&
              calls[i].demand() > est.cluster().instance(*calls[i].decode_instance).kv_capacity)) {
            remaining.push_back(i);
        } else {
            plan.infeasible.push_back(calls[i].call);
        }
    }

    std::vector<PairChoice> choice(n);
    std::vector<double> risk(n, 0.0);
    auto update_risk = [&](std::span<const std::size_t> which) {
        for (auto i : which) {
            risk[i] = projected_ratio(now, calls[i].arrival, choice[i].delta(now), calls[i].horizon);
        }
    };
    // Higher risk first; ties to earlier a_w, smaller workflow id, smaller call id.
    auto more_urgent = [&](std::size_t a, std::size_t b) {
        if (risk[a] != risk[b]) {
            return risk[a] > risk[b];
        }
        return std::tie(calls[a].arrival, calls[a].workflow, calls[a].call) <
               std::tie(calls[b].arrival, calls[b].workflow, calls[b].call);
    };
    auto commit = [&](std::size_t i, const PairChoice& pc) {
        if (stage == Stage::Prefill) {
            commit_prefill(state, calls[i], pc);
            plan.entries.push_back(make_entry(calls[i], pc.prefill, pc.decode, ranks.take(pc.prefill)));
        } else {
            commit_decode(state, calls[i], pc);
            plan.entries.push_back(make_entry(calls[i], calls[i].prefill_instance.value_or(-1), pc.decode,
                                              ranks.take(pc.decode)));
        }
    };

    if (remaining.size() <= static_cast<std::size_t>(std::max(cfg.greedy_threshold, 0))) {
        std::vector<std::size_t> dirty = remaining;
        while (!remaining.empty()) {
            score_candidates(cfg.kernel, stage, calls, dirty, state, est, now, choice);
            update_risk(dirty);
            auto best_it = std::min_element(remaining.begin(), remaining.end(),
                                            [&](std::size_t a, std::size_t b) { return more_urgent(a, b); });
            const std::size_t best = *best_it;
            const PairChoice picked = choice[best];
            commit(best, picked);
            remaining.erase(best_it);

            dirty.clear();
            for (auto i : remaining) {
                const bool touched = choice[i].decode == picked.decode ||
                                     (stage == Stage::Prefill && choice[i].prefill == picked.prefill);
                if (!cfg.incremental || touched) {
                    dirty.push_back(i);
                }
            }
        }
    } else {
        // One pass: rank once against the live snapshot, then place in that order.
        score_candidates(cfg.kernel, stage, calls, remaining, state, est, now, choice);
        update_risk(remaining);
        std::sort(remaining.begin(), remaining.end(), more_urgent);
        for (auto i : remaining) {
            const PairChoice pc = stage == Stage::Prefill ? project_prefill_delta(calls[i], state, est, now)
                                                          : project_decode_delta(calls[i], state, est, now);
            commit(i, pc);
        }
    }
    return plan;
}

enum class Placement { LoadBalanced, ProjectedFinish };

// Places calls in the given priority order.
SchedulePlan ordered_plan(const StageSnapshot& snap, const Estimator& est, const std::vector<std::size_t>& order,
                          Placement placement) {
    const auto& cluster = est.cluster();
    const Seconds now = snap.now;
    SchedulePlan plan;
    plan.stage = snap.stage;
    plan.created_at = now;
    RankCounter ranks(cluster.instances.size());

    if (placement == Placement::ProjectedFinish) {
        PlanningState state = snap.stage == Stage::Prefill ? PlanningState::for_prefill(snap, false)
                                                           : PlanningState::for_decode(snap);
        for (auto i : order) {
            const auto& c = snap.waiting[i];
            if (snap.stage == Stage::Prefill) {
                const auto pc = project_prefill_delta(c, state, est, now);
                if (!pc.feasible) {
                    plan.infeasible.push_back(c.call);
                    continue;
                }
                commit_prefill(state, c, pc);
                plan.entries.push_back(make_entry(c, pc.prefill, pc.decode, ranks.take(pc.prefill)));
            } else {
                const auto pc = project_decode_delta(c, state, est, now);
                if (!pc.feasible) {
                    plan.infeasible.push_back(c.call);
                    continue;
                }
                commit_decode(state, c, pc);
                plan.entries.push_back(
                    make_entry(c, c.prefill_instance.value_or(-1), pc.decode, ranks.take(pc.decode)));
            }
        }
        return plan;
    }

    // Least outstanding estimated work, ties to the lower instance id.
    std::vector<Seconds> prefill_work(cluster.instances.size(), 0.0);
    std::vector<Seconds> decode_work = snap.decode_outstanding;
    decode_work.resize(cluster.instances.size(), 0.0);
    for (const auto& inst : cluster.instances) {
        if (inst.pool == Pool::Prefill) {
            prefill_work[static_cast<std::size_t>(inst.id)] =
                std::max(0.0, snap.prefill_free[static_cast<std::size_t>(inst.id)] - now);
        }
    }
    auto least_loaded_decode = [&](const WaitingCall& c) {
        InstanceId best = -1;
        for (const auto& d : cluster.instances) {
            if (d.pool != Pool::Decode || c.demand() > d.kv_capacity) {
                continue;
            }
            if (best < 0 || decode_work[static_cast<std::size_t>(d.id)] < decode_work[static_cast<std::size_t>(best)]) {
                best = d.id;
            }
        }
        return best;
    };
    for (auto i : order) {
        const auto& c = snap.waiting[i];
        if (snap.stage == Stage::Prefill) {
            const InstanceId d = least_loaded_decode(c);
            if (d < 0) {
                plan.infeasible.push_back(c.call);
                continue;
            }
            InstanceId p = -1;
            for (const auto& inst : cluster.instances) {
                if (inst.pool == Pool::Prefill &&
                    (p < 0 || prefill_work[static_cast<std::size_t>(inst.id)] < prefill_work[static_cast<std::size_t>(p)])) {
                    p = inst.id;
                }
            }
            prefill_work[static_cast<std::size_t>(p)] += est.prefill(c.call, c.input_len, p);
            decode_work[static_cast<std::size_t>(d)] += est.decode(c.call, c.predicted_output, d);
            plan.entries.push_back(make_entry(c, p, d, ranks.take(p)));
        } else {
            InstanceId d = (c.decode_locked && c.decode_instance) ? *c.decode_instance : least_loaded_decode(c);
            if (d < 0 || c.demand() > cluster.instance(d).kv_capacity) {
                plan.infeasible.push_back(c.call);
                continue;
            }
            decode_work[static_cast<std::size_t>(d)] += est.decode(c.call, c.predicted_output, d);
            plan.entries.push_back(make_entry(c, c.prefill_instance.value_or(-1), d, ranks.take(d)));
        }
    }
    return plan;
}

template <typename KeyFn>
std::vector<std::size_t> order_by(const StageSnapshot& snap, KeyFn key) {
    std::vector<std::size_t> order(snap.waiting.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return key(snap.waiting[a]) < key(snap.waiting[b]); });
    return order;
}

}  // namespace

std::vector<ProjectedRisk> projected_risks(const StageSnapshot& snap, const Estimator& est) {
    PlanningState state = snap.stage == Stage::Prefill ? PlanningState::for_prefill(snap, false)
                                                       : PlanningState::for_decode(snap);
    std::vector<ProjectedRisk> out;
    for (const auto& c : snap.waiting) {
        const auto pc = snap.stage == Stage::Prefill ? project_prefill_delta(c, state, est, snap.now)
                                                     : project_decode_delta(c, state, est, snap.now);
        if (!pc.feasible) {
            continue;
        }
        const Seconds delta = pc.delta(snap.now);
        out.push_back({c.call, snap.stage, delta, projected_ratio(snap.now, c.arrival, delta, c.horizon), pc.prefill,
                       pc.decode});
    }
    return out;
}

SchedulePlan plan_prefill_hexagent(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg) {
    if (snap.stage != Stage::Prefill) {
        throw std::invalid_argument("plan_prefill_hexagent needs a prefill snapshot");
    }
    return risk_plan(snap, est, cfg);
}

SchedulePlan plan_decode_hexagent(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg) {
    if (snap.stage != Stage::Decode) {
        throw std::invalid_argument("plan_decode_hexagent needs a decode snapshot");
    }
    return risk_plan(snap, est, cfg);
}

SchedulePlan order_per_call_fcfs(const StageSnapshot& snap, const Estimator& est) {
    auto order = order_by(snap, [](const WaitingCall& c) { return std::make_tuple(c.revealed_at, c.call); });
    return ordered_plan(snap, est, order, Placement::LoadBalanced);
}

SchedulePlan order_workflow_fcfs(const StageSnapshot& snap, const Estimator& est) {
    auto order = order_by(snap, [](const WaitingCall& c) {
        return std::make_tuple(c.arrival, c.workflow, c.topo_index, c.call);
    });
    return ordered_plan(snap, est, order, Placement::LoadBalanced);
}

SchedulePlan order_workflow_llf(const StageSnapshot& snap, const Estimator& est, double kappa) {
    std::unordered_map<WorkflowId, double> laxity;
    for (const auto& [id, w] : snap.workflows) {
        laxity[id] = (w.arrival + kappa * w.horizon) - snap.now - w.remaining_path;
    }
    auto order = order_by(snap, [&](const WaitingCall& c) {
        return std::make_tuple(laxity.at(c.workflow), c.arrival, c.workflow, c.topo_index, c.call);
    });
    return ordered_plan(snap, est, order, Placement::ProjectedFinish);
}

SchedulePlan order_attained_service(const StageSnapshot& snap, const Estimator& est) {
    auto order = order_by(snap, [&](const WaitingCall& c) {
        return std::make_tuple(snap.workflow(c.workflow).attained, c.arrival, c.workflow, c.topo_index, c.call);
    });
    return ordered_plan(snap, est, order, Placement::ProjectedFinish);
}

SchedulePlan make_plan(const StageSnapshot& snap, const Estimator& est, const PolicyConfig& cfg) {
    switch (cfg.kind) {
    case PolicyKind::HexAGenT:
        return risk_plan(snap, est, cfg);
    case PolicyKind::PerCallFCFS:
        return order_per_call_fcfs(snap, est);
    case PolicyKind::WorkflowFCFS:
        return order_workflow_fcfs(snap, est);
    case PolicyKind::WorkflowLLF:
        return order_workflow_llf(snap, est, cfg.llf_kappa);
    case PolicyKind::AttainedService:
        return order_attained_service(snap, est);
    }
    throw ConfigError("unhandled policy kind");
}

std::vector<FallbackAssignment> fallback_assign_all(std::span<const WaitingCall> calls, const StageSnapshot& snap,
                                                    const Estimator& est) {
    std::vector<const WaitingCall*> order;
    order.reserve(calls.size());
    for (const auto& c : calls) {
        order.push_back(&c);
    }
    std::sort(order.begin(), order.end(), [](const WaitingCall* a, const WaitingCall* b) {
        return std::tie(a->arrival, a->workflow, a->topo_index, a->call) <
               std::tie(b->arrival, b->workflow, b->topo_index, b->call);
    });
    PlanningState state = snap.stage == Stage::Prefill ? PlanningState::for_prefill(snap, true)
                                                       : PlanningState::for_decode(snap);
    std::vector<FallbackAssignment> out;
    for (const auto* c : order) {
        const auto key = fallback_key(c->arrival, c->workflow, c->topo_index, c->call);
        if (snap.stage == Stage::Prefill) {
            const auto pc = project_prefill_delta(*c, state, est, snap.now);
            if (!pc.feasible) {
                continue;
            }
            commit_prefill(state, *c, pc);
            out.push_back({c->call, pc.prefill, pc.decode, key});
        } else {
            const auto pc = project_decode_delta(*c, state, est, snap.now);
            if (!pc.feasible) {
                continue;
            }
            commit_decode(state, *c, pc);
            out.push_back({c->call, c->prefill_instance.value_or(-1), pc.decode, key});
        }
    }
    return out;
}

FallbackAssignment fallback_assign(const WaitingCall& call, const StageSnapshot& snap, const Estimator& est) {
    auto out = fallback_assign_all(std::span<const WaitingCall>(&call, 1), snap, est);
    if (out.empty()) {
        throw NoFeasibleDecode(call.call);
    }
    return out.front();
}

}  // namespace agentsim
