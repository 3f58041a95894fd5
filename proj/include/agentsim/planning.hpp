#pragma once

#include <span>
#include <vector>

#include "agentsim/latency.hpp"
#include "agentsim/ledger.hpp"
#include "agentsim/plan.hpp"

namespace agentsim {

// Simulated availability Ŝ a planner mutates while it commits decisions.
struct PlanningState {
    std::vector<Seconds> prefill_free;
    std::vector<DecodeCapacityLedger> decode;
    // Earliest start the next admission on each decode instance may take, so
    // projected starts respect queue order.
    std::vector<Seconds> decode_floor;

    // Starting point for prefill planning: running work plus decode hints.
    static PlanningState for_prefill(const StageSnapshot& snap, bool include_queued);
    // Starting point for decode planning: running decodes only.
    static PlanningState for_decode(const StageSnapshot& snap);
};

// Best placement of one call against a planning state.
struct PairChoice {
    bool feasible = false;
    InstanceId prefill = -1;
    InstanceId decode = -1;
    Seconds prefill_start = 0.0;
    Seconds prefill_end = 0.0;
    Seconds decode_start = 0.0;
    Seconds decode_end = 0.0;

    // Δ_s(c, t): projected time from `now` until the call leaves decode.
    Seconds delta(Seconds now) const { return decode_end - now; }
};

// Enumerates every (prefill, decode) pair with m(c) <= Cap(d):
// wait + prefill + transfer + decode wait + decode, earliest decode finish
// wins, ties to the lower prefill then decode id.
PairChoice project_prefill_delta(const WaitingCall& call, const PlanningState& state, const Estimator& est,
                                 Seconds now);

// Decode-stage slot: a locked call only considers its own instance, a free
// call considers every feasible one.
PairChoice project_decode_delta(const WaitingCall& call, const PlanningState& state, const Estimator& est,
                                Seconds now);

void commit_prefill(PlanningState& state, const WaitingCall& call, const PairChoice& choice);
void commit_decode(PlanningState& state, const WaitingCall& call, const PairChoice& choice);

enum class KernelMode { Serial, Parallel };

// Scores calls[which[i]] into out[which[i]]. The parallel version splits the
// work across OpenMP threads; both write identical results.
void score_candidates_serial(Stage stage, std::span<const WaitingCall> calls, std::span<const std::size_t> which,
                             const PlanningState& state, const Estimator& est, Seconds now,
                             std::span<PairChoice> out);
void score_candidates_parallel(Stage stage, std::span<const WaitingCall> calls, std::span<const std::size_t> which,
                               const PlanningState& state, const Estimator& est, Seconds now,
                               std::span<PairChoice> out);

inline void score_candidates(KernelMode mode, Stage stage, std::span<const WaitingCall> calls,
                             std::span<const std::size_t> which, const PlanningState& state, const Estimator& est,
                             Seconds now, std::span<PairChoice> out) {
    if (mode == KernelMode::Parallel) {
        score_candidates_parallel(stage, calls, which, state, est, now, out);
    } else {
        score_candidates_serial(stage, calls, which, state, est, now, out);
    }
}

// ((now - a_w) + delta) / horizon. Throws NonPositiveHorizon.
double projected_ratio(Seconds now, Seconds arrival, Seconds delta, Seconds horizon);

}  // namespace agentsim
