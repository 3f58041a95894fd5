#include "agentsim/planning.hpp"

#include <algorithm>
#include <limits>

#include "agentsim/errors.hpp"

namespace agentsim {

PlanningState PlanningState::for_prefill(const StageSnapshot& snap, bool include_queued) {
    PlanningState s;
    s.prefill_free = snap.prefill_free;
    if (include_queued) {
        for (std::size_t i = 0; i < s.prefill_free.size() && i < snap.prefill_queued.size(); ++i) {
            s.prefill_free[i] += snap.prefill_queued[i];
        }
    }
    s.decode = snap.decode_hint;
    s.decode_floor.assign(s.decode.size(), snap.now);
    return s;
}

PlanningState PlanningState::for_decode(const StageSnapshot& snap) {
    PlanningState s;
    s.prefill_free = snap.prefill_free;
    s.decode = snap.decode_running;
    s.decode_floor.assign(s.decode.size(), snap.now);
    return s;
}

PairChoice project_prefill_delta(const WaitingCall& call, const PlanningState& state, const Estimator& est,
                                 Seconds now) {
    const auto& cluster = est.cluster();
    const Tokens demand = call.demand();
    const Seconds ready = std::max(now, call.ready_at);
    PairChoice best;
    best.decode_end = std::numeric_limits<Seconds>::infinity();
    Tokens best_peak = -1;
    for (const auto& p : cluster.instances) {
        if (p.pool != Pool::Prefill) {
            continue;
        }
        const Seconds ps = std::max(ready, state.prefill_free[static_cast<std::size_t>(p.id)]);
        const Seconds pe = ps + est.prefill(call.call, call.input_len, p.id);
        for (const auto& d : cluster.instances) {
            if (d.pool != Pool::Decode || demand > d.kv_capacity) {
                continue;
            }
            const Seconds dec = est.decode(call.call, call.predicted_output, d.id);
            const Seconds arrive = pe + est.transfer(call.input_len, p.id, d.id);
            const Seconds ds =
                state.decode[static_cast<std::size_t>(d.id)].earliest_feasible_start(demand, dec, arrive);
            const Seconds de = ds + dec;
            if (de < best.decode_end) {
                best = {true, p.id, d.id, ps, pe, ds, de};
                best_peak = -1;
            } else if (de == best.decode_end && p.id == best.prefill) {
                // Equal finish on twin decode instances: take the emptier one so
                // a misestimated neighbour is less likely to block admission.
                const auto& ledger = state.decode[static_cast<std::size_t>(d.id)];
                if (best_peak < 0) {
                    best_peak = state.decode[static_cast<std::size_t>(best.decode)].peak_occupancy(best.decode_start,
                                                                                                  best.decode_end);
                }
                const Tokens peak = ledger.peak_occupancy(ds, de);
                if (peak < best_peak) {
                    best = {true, p.id, d.id, ps, pe, ds, de};
                    best_peak = peak;
                }
            }
        }
    }
    return best;
}

PairChoice project_decode_delta(const WaitingCall& call, const PlanningState& state, const Estimator& est,
                                Seconds now) {
    const auto& cluster = est.cluster();
    const Tokens demand = call.demand();
    PairChoice best;
    best.decode_end = std::numeric_limits<Seconds>::infinity();
    auto consider = [&](const InstanceSpec& d) {
        if (demand > d.kv_capacity) {
            return;
        }
        const auto di = static_cast<std::size_t>(d.id);
        const Seconds dec = est.decode(call.call, call.predicted_output, d.id);
        const Seconds ready = std::max({now, call.ready_at, state.decode_floor[di]});
        const Seconds ds = state.decode[di].earliest_feasible_start(demand, dec, ready);
        const Seconds de = ds + dec;
        if (de < best.decode_end) {
            best = {true, call.prefill_instance.value_or(-1), d.id, 0.0, 0.0, ds, de};
        }
    };
    if (call.decode_locked && call.decode_instance) {
        consider(cluster.instance(*call.decode_instance));
    } else {
        for (const auto& d : cluster.instances) {
            if (d.pool == Pool::Decode) {
                consider(d);
            }
        }
    }
    return best;
}

void commit_prefill(PlanningState& state, const WaitingCall& call, const PairChoice& choice) {
    state.prefill_free[static_cast<std::size_t>(choice.prefill)] = choice.prefill_end;
    state.decode[static_cast<std::size_t>(choice.decode)].insert(
        {choice.decode_start, choice.decode_end, call.demand()});
}

void commit_decode(PlanningState& state, const WaitingCall& call, const PairChoice& choice) {
    const auto di = static_cast<std::size_t>(choice.decode);
    state.decode[di].insert({choice.decode_start, choice.decode_end, call.demand()});
    state.decode_floor[di] = std::max(state.decode_floor[di], choice.decode_start);
}

namespace {

PairChoice score_one(Stage stage, const WaitingCall& call, const PlanningState& state, const Estimator& est,
                     Seconds now) {
    return stage == Stage::Prefill ? project_prefill_delta(call, state, est, now)
                                   : project_decode_delta(call, state, est, now);
}

}  // namespace

void score_candidates_serial(Stage stage, std::span<const WaitingCall> calls, std::span<const std::size_t> which,
                             const PlanningState& state, const Estimator& est, Seconds now,
                             std::span<PairChoice> out) {
    for (auto i : which) {
        out[i] = score_one(stage, calls[i], state, est, now);
    }
}

void score_candidates_parallel(Stage stage, std::span<const WaitingCall> calls, std::span<const std::size_t> which,
                               const PlanningState& state, const Estimator& est, Seconds now,
                               std::span<PairChoice> out) {
    const auto n = static_cast<std::ptrdiff_t>(which.size());
    // Below a few dozen candidates the fork/join costs more than it saves.
#pragma omp parallel for schedule(dynamic, 4) if (n >= 32)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto i = which[static_cast<std::size_t>(k)];
        out[i] = score_one(stage, calls[i], state, est, now);
    }
}

double projected_ratio(Seconds now, Seconds arrival, Seconds delta, Seconds horizon) {
    if (!(horizon > 0.0)) {
        throw NonPositiveHorizon();
    }
    return ((now - arrival) + delta) / horizon;
}

}  // namespace agentsim
