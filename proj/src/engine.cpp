#include "agentsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <tuple>

#include "agentsim/errors.hpp"

namespace agentsim {

std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::WorkflowArrival: return "workflow_arrival";
    case EventKind::CallReveal: return "call_reveal";
    case EventKind::BootstrapComplete: return "bootstrap_complete";
    case EventKind::PrefillStart: return "prefill_start";
    case EventKind::PrefillComplete: return "prefill_complete";
    case EventKind::TransferComplete: return "transfer_complete";
    case EventKind::DecodeStart: return "decode_start";
    case EventKind::DecodeComplete: return "decode_complete";
    case EventKind::PlanReady: return "plan_ready";
    }
    return "?";
}

int kind_priority(EventKind k) {
    switch (k) {
    case EventKind::PrefillComplete:
    case EventKind::TransferComplete:
    case EventKind::DecodeComplete:
        return 0;
    case EventKind::WorkflowArrival:
    case EventKind::CallReveal:
    case EventKind::BootstrapComplete:
        return 1;
    case EventKind::PlanReady:
        return 2;
    case EventKind::PrefillStart:
    case EventKind::DecodeStart:
        return 3;
    }
    return 3;
}

std::set<Stage> trigger_stages(const SimEvent& event, bool reveals_children) {
    switch (event.kind) {
    case EventKind::WorkflowArrival:
    case EventKind::CallReveal:
        return {Stage::Prefill};
    case EventKind::TransferComplete:
        return {Stage::Decode};
    case EventKind::DecodeComplete:
        if (reveals_children) {
            return {Stage::Prefill};
        }
        return {};
    default:
        return {};
    }
}

bool Simulator::QueueOrder::operator()(const SimEvent& a, const SimEvent& b) const {
    // std::priority_queue pops the largest; invert for earliest first.
    return std::make_tuple(a.time, kind_priority(a.kind), a.sequence) >
           std::make_tuple(b.time, kind_priority(b.kind), b.sequence);
}

Simulator::Simulator(const Trace& trace, const ClusterSpec& cluster, PolicyConfig policy, SimConfig cfg)
    : trace_(&trace),
      cluster_(&cluster),
      policy_(policy),
      cfg_(cfg),
      est_(cluster, cfg.est_error),
      clean_est_(cluster, ErrorConfig{}) {
    validate_cluster(cluster);
    nodes_ = make_call_nodes(trace);
    const auto n = nodes_.size();
    predicted_.resize(n);
    for (auto& node : nodes_) {
        node.predicted_output_len = predict_output_len(node.id, trace.call(node.id).output_len, cfg.predictor);
        predicted_[static_cast<std::size_t>(node.id)] = node.predicted_output_len;
        const auto& spec = trace.call(node.id);
        if (decode_demand(spec.input_len, node.predicted_output_len) > cluster.max_decode_capacity()) {
            throw NoFeasibleDecode(spec.source_id);
        }
    }
    revision_.assign(n, 0);
    key_.resize(n);
    bootstrap_ready_.assign(n, kUnset);
    prefill_duration_.assign(n, 0.0);
    transfer_duration_.assign(n, 0.0);
    decode_duration_.assign(n, 0.0);

    for (const auto& wf : trace.workflows) {
        workflows_.push_back(make_workflow_state(wf));
        HorizonRecord rec;
        rec.workflow = wf.id;
        horizons_.push_back(rec);
    }
    executed_.assign(workflows_.size(), 0.0);

    prefill_running_.assign(cluster.instances.size(), std::nullopt);
    decode_running_.assign(cluster.instances.size(), {});
    for (const auto& inst : cluster.instances) {
        ledgers_.emplace_back(inst.kv_capacity);
    }
    for (const auto& wf : trace.workflows) {
        schedule(wf.arrival, EventKind::WorkflowArrival, wf.id);
    }
}

void Simulator::schedule(Seconds time, EventKind kind, std::int64_t subject) {
    events_.push(SimEvent{time, kind, subject, sequence_++});
}

void Simulator::log(Seconds time, EventKind kind, std::int64_t subject) {
    if (cfg_.record_events) {
        log_.push_back({time, kind, subject});
    }
}

std::optional<Seconds> Simulator::next_event_time() const {
    if (events_.empty()) {
        return std::nullopt;
    }
    return events_.top().time;
}

void Simulator::enter(CallNode& node, CallState s) {
    node.state = s;
    node.entered[lifecycle_index(s)] = now_;
    ++revision_[static_cast<std::size_t>(node.id)];
}

bool Simulator::step() {
    if (events_.empty()) {
        return false;
    }
    const SimEvent e = events_.top();
    events_.pop();
    now_ = e.time;
    log(e.time, e.kind, e.subject);

    std::set<Stage> triggers;
    handle(e, triggers);
    for (auto s : {Stage::Prefill, Stage::Decode}) {
        if (triggers.contains(s)) {
            on_trigger(s);
        }
    }
    dispatch();
    return true;
}

SimResult Simulator::run() {
    while (step()) {
    }
    if (completed_calls_ != nodes_.size()) {
        throw DeadlockDetected(nodes_.size() - completed_calls_, now_);
    }
    return result();
}

void Simulator::handle(const SimEvent& e, std::set<Stage>& triggers) {
    switch (e.kind) {
    case EventKind::WorkflowArrival: {
        auto& w = workflows_[static_cast<std::size_t>(e.subject)];
        auto revealed = reveal_sources(w, *trace_, nodes_, now_);
        for (auto c : revealed) {
            ++revision_[static_cast<std::size_t>(c)];
            waiting(Stage::Prefill).insert(c);
            key_[static_cast<std::size_t>(c)] = fallback_key(w.arrival, w.id, trace_->call(c).topo_index, c);
        }
        refresh_horizon(w.id);
        triggers = trigger_stages(e);
        break;
    }
    case EventKind::CallReveal: {
        const auto c = static_cast<CallId>(e.subject);
        auto& node = nodes_[static_cast<std::size_t>(c)];
        auto& w = workflows_[static_cast<std::size_t>(node.workflow)];
        reveal_call(w, node, now_);
        ++revision_[static_cast<std::size_t>(c)];
        waiting(Stage::Prefill).insert(c);
        key_[static_cast<std::size_t>(c)] = fallback_key(w.arrival, w.id, trace_->call(c).topo_index, c);
        refresh_horizon(w.id);
        triggers = trigger_stages(e);
        break;
    }
    case EventKind::BootstrapComplete:
        break;
    case EventKind::PrefillComplete: {
        const auto c = static_cast<CallId>(e.subject);
        auto& node = nodes_[static_cast<std::size_t>(c)];
        const auto p = *node.prefill_instance;
        const auto d = *node.decode_instance;
        prefill_running_[static_cast<std::size_t>(p)].reset();
        const auto ci = static_cast<std::size_t>(c);
        prefill_duration_[ci] = now_ - node.entered_at(CallState::Prefill);
        executed_[static_cast<std::size_t>(node.workflow)] += prefill_duration_[ci];
        enter(node, CallState::Transfer);
        const auto& call = trace_->call(c);
        const Seconds xfer = transfer_latency(kv_size(call.input_len, cluster_->model), cluster_->instance(p).gpu_class,
                                              cluster_->instance(d).gpu_class, *cluster_);
        schedule(now_ + xfer, EventKind::TransferComplete, c);
        triggers = trigger_stages(e);
        break;
    }
    case EventKind::TransferComplete: {
        const auto c = static_cast<CallId>(e.subject);
        auto& node = nodes_[static_cast<std::size_t>(c)];
        transfer_duration_[static_cast<std::size_t>(c)] = now_ - node.entered_at(CallState::Transfer);
        enter(node, CallState::WaitingDecode);
        waiting(Stage::Decode).insert(c);
        const auto& w = workflows_[static_cast<std::size_t>(node.workflow)];
        key_[static_cast<std::size_t>(c)] = fallback_key(w.arrival, w.id, trace_->call(c).topo_index, c);
        triggers = trigger_stages(e);
        break;
    }
    case EventKind::DecodeComplete: {
        const auto c = static_cast<CallId>(e.subject);
        const auto ci = static_cast<std::size_t>(c);
        auto& node = nodes_[ci];
        const auto d = *node.decode_instance;
        auto& running = decode_running_[static_cast<std::size_t>(d)];
        running.erase(std::remove(running.begin(), running.end(), c), running.end());
        ledgers_[static_cast<std::size_t>(d)].release_until(now_);
        decode_duration_[ci] = now_ - node.entered_at(CallState::Decode);
        executed_[static_cast<std::size_t>(node.workflow)] += decode_duration_[ci];
        enter(node, CallState::Complete);
        ++completed_calls_;

        auto& w = workflows_[static_cast<std::size_t>(node.workflow)];
        w.completed.insert(c);
        horizons_[static_cast<std::size_t>(w.id)].observed[c] =
            ObservedDurations{prefill_duration_[ci], transfer_duration_[ci], decode_duration_[ci]};

        bool revealed_now = false;
        for (auto child : unblocked_children(w, c, *trace_)) {
            const Seconds delay = trace_->call(child).reveal_delay;
            if (delay > 0.0) {
                schedule(now_ + delay, EventKind::CallReveal, child);
                continue;
            }
            reveal_call(w, nodes_[static_cast<std::size_t>(child)], now_);
            ++revision_[static_cast<std::size_t>(child)];
            waiting(Stage::Prefill).insert(child);
            key_[static_cast<std::size_t>(child)] =
                fallback_key(w.arrival, w.id, trace_->call(child).topo_index, child);
            revealed_now = true;
        }
        if (w.completed.size() == trace_->workflow(w.id).calls.size()) {
            w.completion = now_;
        }
        refresh_horizon(w.id);
        triggers = trigger_stages(e, revealed_now);
        break;
    }
    case EventKind::PlanReady: {
        const auto idx = in_flight_[0] && in_flight_[0]->id == static_cast<std::uint64_t>(e.subject) ? 0u : 1u;
        auto& slot = in_flight_[idx];
        if (!slot || slot->id != static_cast<std::uint64_t>(e.subject)) {
            break;
        }
        const SchedulePlan plan = std::move(*slot);
        slot.reset();
        apply_plan(plan);
        if (pending_trigger_[idx]) {
            pending_trigger_[idx] = false;
            triggers.insert(plan.stage);
        }
        break;
    }
    case EventKind::PrefillStart:
    case EventKind::DecodeStart:
        break;
    }
}

void Simulator::refresh_horizon(WorkflowId w) {
    const auto& state = workflows_[static_cast<std::size_t>(w)];
    std::vector<CallId> revealed(state.revealed.begin(), state.revealed.end());
    auto& rec = horizons_[static_cast<std::size_t>(w)];
    refine_on_reveal(rec, revealed, *trace_, clean_est_, predicted_, cfg_.refine_with_observed);
    rec.last_recompute_event = sequence_;
    workflows_[static_cast<std::size_t>(w)].horizon = rec.horizon;
    if (cfg_.record_horizons) {
        horizon_log_.push_back({w, now_, rec.horizon});
    }
}

void Simulator::on_trigger(Stage stage) {
    if (waiting(stage).empty()) {
        return;
    }
    if (plan_in_flight(stage)) {
        pending_trigger_[stage_index(stage)] = true;
        run_fallback(stage);
        return;
    }
    launch_plan(stage);
}

void Simulator::launch_plan(Stage stage) {
    const StageSnapshot snap = snapshot(stage);
    const auto t0 = std::chrono::steady_clock::now();
    SchedulePlan plan = make_plan(snap, est_, policy_);
    const auto t1 = std::chrono::steady_clock::now();
    plan.id = next_plan_id_++;
    plan.stage = stage;
    plan.created_at = now_;
    plan.planning_latency = cfg_.planning_latency;

    PlannerRecord rec;
    rec.plan_id = plan.id;
    rec.time = now_;
    rec.stage = stage;
    rec.queue_len = snap.waiting.size();
    rec.wall_us = cfg_.measure_wallclock ? std::chrono::duration<double, std::micro>(t1 - t0).count() : 0.0;
    rec.sim_latency = cfg_.planning_latency;
    planner_.push_back(rec);

    if (cfg_.planning_latency <= 0.0) {
        apply_plan(plan);
        return;
    }
    const auto idx = stage_index(stage);
    schedule(now_ + cfg_.planning_latency, EventKind::PlanReady, static_cast<std::int64_t>(plan.id));
    in_flight_[idx] = std::move(plan);
    max_in_flight_ = std::max<std::size_t>(max_in_flight_, 1);
    run_fallback(stage);
}

void Simulator::assign_prefill(CallId c, InstanceId p, InstanceId d) {
    auto& node = nodes_[static_cast<std::size_t>(c)];
    const auto ci = static_cast<std::size_t>(c);
    node.prefill_instance = p;
    node.decode_instance = d;
    if (std::isnan(bootstrap_ready_[ci])) {
        bootstrap_ready_[ci] = now_ + cfg_.bootstrap_latency;
        if (cfg_.bootstrap_latency > 0.0) {
            schedule(bootstrap_ready_[ci], EventKind::BootstrapComplete, c);
        }
    }
}

void Simulator::run_fallback(Stage stage) {
    const StageSnapshot snap = snapshot(stage);
    std::vector<WaitingCall> unassigned;
    for (const auto& wc : snap.waiting) {
        const bool needs = stage == Stage::Prefill ? !wc.prefill_instance.has_value() : !wc.decode_instance.has_value();
        if (needs) {
            unassigned.push_back(wc);
        }
    }
    if (unassigned.empty()) {
        return;
    }
    for (const auto& a : fallback_assign_all(unassigned, snap, est_)) {
        if (stage == Stage::Prefill) {
            assign_prefill(a.call, a.prefill_instance, a.decode_instance);
        } else {
            nodes_[static_cast<std::size_t>(a.call)].decode_instance = a.decode_instance;
        }
        key_[static_cast<std::size_t>(a.call)] = a.key;
        ++fallback_count_;
    }
}

std::vector<ApplyOutcome> Simulator::apply_plan(const SchedulePlan& plan) {
    const CallState want = plan.stage == Stage::Prefill ? CallState::WaitingPrefill : CallState::WaitingDecode;
    std::vector<ApplyOutcome> out;
    out.reserve(plan.entries.size());
    std::set<CallId> applied;
    for (const auto& e : plan.entries) {
        const auto ci = static_cast<std::size_t>(e.call);
        auto& node = nodes_.at(ci);
        bool ok = node.state == want && revision_[ci] == e.revision;
        if (ok && plan.stage == Stage::Decode && node.decode_locked && node.decode_instance != e.decode_instance) {
            ok = false;
        }
        if (!ok) {
            out.push_back(ApplyOutcome::StaleIgnored);
            continue;
        }
        if (plan.stage == Stage::Prefill) {
            assign_prefill(e.call, e.prefill_instance, e.decode_instance);
        } else {
            node.decode_instance = e.decode_instance;
        }
        const auto& w = workflows_[static_cast<std::size_t>(node.workflow)];
        key_[ci] = QueueKey{0, e.rank, w.arrival, w.id, trace_->call(e.call).topo_index, e.call};
        ++revision_[ci];
        applied.insert(e.call);
        out.push_back(ApplyOutcome::Applied);
    }
    // Anything still waiting that this plan did not place falls back to FCFS
    // order behind the planned calls.
    for (auto c : waiting(plan.stage)) {
        if (!applied.contains(c)) {
            auto& k = key_[static_cast<std::size_t>(c)];
            k.tier = 1;
            k.rank = 0;
        }
    }
    if (!planner_.empty()) {
        for (auto it = planner_.rbegin(); it != planner_.rend(); ++it) {
            if (it->plan_id == plan.id) {
                it->applied = applied.size();
                it->stale = out.size() - applied.size();
                break;
            }
        }
    }
    last_outcomes_ = out;
    return out;
}

void Simulator::start_prefill(CallId c, InstanceId p) {
    const auto ci = static_cast<std::size_t>(c);
    auto& node = nodes_[ci];
    waiting(Stage::Prefill).erase(c);
    enter(node, CallState::Prefill);
    node.decode_locked = true;
    prefill_running_[static_cast<std::size_t>(p)] = c;
    log(now_, EventKind::PrefillStart, c);
    const Seconds dur = prefill_time(trace_->call(c), cluster_->instance(p), cluster_->model);
    schedule(now_ + dur, EventKind::PrefillComplete, c);
}

void Simulator::start_decode_call(CallId c, InstanceId d) {
    const auto ci = static_cast<std::size_t>(c);
    auto& node = nodes_[ci];
    const auto& call = trace_->call(c);
    const Seconds dur = decode_time(call, node, cluster_->instance(d), cluster_->model, false);
    start_decode(ledgers_[static_cast<std::size_t>(d)], decode_demand(call.input_len, node.predicted_output_len), now_,
                 dur);
    waiting(Stage::Decode).erase(c);
    enter(node, CallState::Decode);
    decode_running_[static_cast<std::size_t>(d)].push_back(c);
    log(now_, EventKind::DecodeStart, c);
    schedule(now_ + dur, EventKind::DecodeComplete, c);
}

void Simulator::dispatch() {
    // Prefill: each idle single-server instance takes its best-ranked ready call.
    for (const auto& inst : cluster_->instances) {
        if (inst.pool != Pool::Prefill || prefill_running_[static_cast<std::size_t>(inst.id)]) {
            continue;
        }
        std::optional<CallId> best;
        for (auto c : waiting(Stage::Prefill)) {
            const auto ci = static_cast<std::size_t>(c);
            const auto& node = nodes_[ci];
            if (node.prefill_instance != inst.id || bootstrap_ready_[ci] > now_) {
                continue;
            }
            if (!best || key_[ci] < key_[static_cast<std::size_t>(*best)]) {
                best = c;
            }
        }
        if (best) {
            start_prefill(*best, inst.id);
        }
    }
    // Decode: admit in queue order while the head fits.
    for (const auto& inst : cluster_->instances) {
        if (inst.pool != Pool::Decode) {
            continue;
        }
        std::vector<CallId> queue;
        for (auto c : waiting(Stage::Decode)) {
            if (nodes_[static_cast<std::size_t>(c)].decode_instance == inst.id) {
                queue.push_back(c);
            }
        }
        if (queue.empty()) {
            continue;
        }
        std::sort(queue.begin(), queue.end(), [&](CallId a, CallId b) {
            return key_[static_cast<std::size_t>(a)] < key_[static_cast<std::size_t>(b)];
        });
        auto& ledger = ledgers_[static_cast<std::size_t>(inst.id)];
        for (auto c : queue) {
            const auto& node = nodes_[static_cast<std::size_t>(c)];
            const Tokens m = decode_demand(trace_->call(c).input_len, node.predicted_output_len);
            if (ledger.occupancy_at(now_) + m > ledger.capacity()) {
                break;
            }
            start_decode_call(c, inst.id);
        }
    }
}

Seconds Simulator::attained(WorkflowId w) const {
    Seconds total = executed_[static_cast<std::size_t>(w)];
    for (auto c : workflows_[static_cast<std::size_t>(w)].revealed) {
        const auto& node = nodes_[static_cast<std::size_t>(c)];
        if (node.state == CallState::Prefill) {
            total += now_ - node.entered_at(CallState::Prefill);
        } else if (node.state == CallState::Decode) {
            total += now_ - node.entered_at(CallState::Decode);
        }
    }
    return total;
}

Seconds Simulator::remaining_path(WorkflowId w) const {
    Seconds worst = 0.0;
    for (auto c : workflows_[static_cast<std::size_t>(w)].revealed) {
        const auto& node = nodes_[static_cast<std::size_t>(c)];
        const auto& call = trace_->call(c);
        const Tokens out = node.predicted_output_len;
        Seconds rem = 0.0;
        switch (node.state) {
        case CallState::WaitingPrefill: {
            rem = std::numeric_limits<Seconds>::infinity();
            const Tokens m = decode_demand(call.input_len, out);
            for (const auto& p : cluster_->instances) {
                if (p.pool != Pool::Prefill) continue;
                for (const auto& d : cluster_->instances) {
                    if (d.pool != Pool::Decode || m > d.kv_capacity) continue;
                    rem = std::min(rem, clean_est_.clean_prefill(call.input_len, p.id) +
                                            clean_est_.transfer(call.input_len, p.id, d.id) +
                                            clean_est_.clean_decode(out, d.id));
                }
            }
            if (std::isinf(rem)) rem = 0.0;
            break;
        }
        case CallState::Prefill: {
            const auto p = *node.prefill_instance;
            const auto d = *node.decode_instance;
            rem = std::max(0.0, node.entered_at(CallState::Prefill) + clean_est_.clean_prefill(call.input_len, p) - now_) +
                  clean_est_.transfer(call.input_len, p, d) + clean_est_.clean_decode(out, d);
            break;
        }
        case CallState::Transfer: {
            const auto p = *node.prefill_instance;
            const auto d = *node.decode_instance;
            rem = std::max(0.0, node.entered_at(CallState::Transfer) + clean_est_.transfer(call.input_len, p, d) - now_) +
                  clean_est_.clean_decode(out, d);
            break;
        }
        case CallState::WaitingDecode:
            rem = clean_est_.clean_decode(out, *node.decode_instance);
            break;
        case CallState::Decode:
            rem = std::max(0.0, node.entered_at(CallState::Decode) + clean_est_.clean_decode(out, *node.decode_instance) -
                                    now_);
            break;
        default:
            break;
        }
        worst = std::max(worst, rem);
    }
    return worst;
}

StageSnapshot Simulator::snapshot(Stage stage) const {
    StageSnapshot snap;
    snap.now = now_;
    snap.stage = stage;
    const auto n_inst = cluster_->instances.size();

    for (auto c : waiting(stage)) {
        const auto ci = static_cast<std::size_t>(c);
        const auto& node = nodes_[ci];
        const auto& call = trace_->call(c);
        const auto& w = workflows_[static_cast<std::size_t>(node.workflow)];
        WaitingCall wc;
        wc.call = c;
        wc.workflow = w.id;
        wc.arrival = w.arrival;
        wc.horizon = w.horizon;
        wc.input_len = call.input_len;
        wc.predicted_output = node.predicted_output_len;
        wc.revealed_at = node.entered_at(CallState::WaitingPrefill);
        wc.topo_index = call.topo_index;
        wc.prefill_instance = node.prefill_instance;
        wc.decode_instance = node.decode_instance;
        wc.decode_locked = node.decode_locked;
        wc.revision = revision_[ci];
        if (stage == Stage::Prefill) {
            wc.ready_at = std::isnan(bootstrap_ready_[ci]) ? now_ + cfg_.bootstrap_latency : bootstrap_ready_[ci];
        } else {
            wc.ready_at = node.entered_at(CallState::WaitingDecode);
        }
        snap.waiting.push_back(wc);
        if (!snap.workflows.contains(w.id)) {
            snap.workflows.emplace(w.id, WorkflowView{w.id, w.arrival, w.horizon, attained(w.id), remaining_path(w.id)});
        }
    }

    snap.prefill_free.assign(n_inst, now_);
    snap.prefill_queued.assign(n_inst, 0.0);
    snap.decode_outstanding.assign(n_inst, 0.0);
    for (const auto& inst : cluster_->instances) {
        snap.decode_running.emplace_back(inst.pool == Pool::Decode ? inst.kv_capacity : 0);
        const auto pi = static_cast<std::size_t>(inst.id);
        if (inst.pool == Pool::Prefill && prefill_running_[pi]) {
            const auto c = *prefill_running_[pi];
            const auto& node = nodes_[static_cast<std::size_t>(c)];
            const Seconds end = node.entered_at(CallState::Prefill) + est_.prefill(c, trace_->call(c).input_len, inst.id);
            snap.prefill_free[pi] = std::max(now_, end);
        }
    }
    for (auto c : waiting(Stage::Prefill)) {
        const auto& node = nodes_[static_cast<std::size_t>(c)];
        if (node.prefill_instance) {
            snap.prefill_queued[static_cast<std::size_t>(*node.prefill_instance)] +=
                est_.prefill(c, trace_->call(c).input_len, *node.prefill_instance);
        }
    }

    // Running decodes, clamped to start now so past overlaps cannot show up
    // as phantom overflows.
    for (const auto& inst : cluster_->instances) {
        if (inst.pool != Pool::Decode) {
            continue;
        }
        const auto di = static_cast<std::size_t>(inst.id);
        for (auto c : decode_running_[di]) {
            const auto& node = nodes_[static_cast<std::size_t>(c)];
            Seconds end = node.entered_at(CallState::Decode) + est_.decode(c, node.predicted_output_len, inst.id);
            // Overdue against its estimate but still holding KV: expect it to
            // finish within one more token.
            end = std::max(end, now_ + est_.decode(c, 1, inst.id));
            snap.decode_running[di].insert(
                {now_, end, decode_demand(trace_->call(c).input_len, node.predicted_output_len)});
            snap.decode_outstanding[di] += end - now_;
        }
    }
    snap.decode_hint = snap.decode_running;

    // Calls already bound for a decode instance, projected in order of their
    // estimated arrival there.
    struct Pending {
        Seconds ready;
        CallId call;
        InstanceId decode;
    };
    std::vector<Pending> pending;
    for (std::size_t ci = 0; ci < nodes_.size(); ++ci) {
        const auto& node = nodes_[ci];
        const auto c = static_cast<CallId>(ci);
        const auto& call = trace_->call(c);
        Seconds ready = 0.0;
        switch (node.state) {
        case CallState::Prefill: {
            const auto p = *node.prefill_instance;
            ready = std::max(now_, node.entered_at(CallState::Prefill) + est_.prefill(c, call.input_len, p)) +
                    est_.transfer(call.input_len, p, *node.decode_instance);
            break;
        }
        case CallState::Transfer:
            ready = std::max(now_, node.entered_at(CallState::Transfer) +
                                       est_.transfer(call.input_len, *node.prefill_instance, *node.decode_instance));
            break;
        case CallState::WaitingDecode:
            ready = now_;
            break;
        default:
            continue;
        }
        pending.push_back({ready, c, *node.decode_instance});
    }
    std::sort(pending.begin(), pending.end(),
              [](const Pending& a, const Pending& b) { return std::tie(a.ready, a.call) < std::tie(b.ready, b.call); });
    for (const auto& pc : pending) {
        const auto& node = nodes_[static_cast<std::size_t>(pc.call)];
        const Tokens m = decode_demand(trace_->call(pc.call).input_len, node.predicted_output_len);
        const Seconds dur = est_.decode(pc.call, node.predicted_output_len, pc.decode);
        auto& ledger = snap.decode_hint[static_cast<std::size_t>(pc.decode)];
        if (m > ledger.capacity()) {
            continue;
        }
        const Seconds start = ledger.earliest_feasible_start(m, dur, pc.ready);
        ledger.insert({start, start + dur, m});
        snap.decode_outstanding[static_cast<std::size_t>(pc.decode)] += dur;
    }
    return snap;
}

SimResult Simulator::result() const {
    SimResult r;
    r.policy = std::string(policy_name(policy_.kind));
    r.calls = nodes_;
    r.planner = planner_;
    r.events = log_;
    r.horizons = horizon_log_;
    r.fallback_assignments = fallback_count_;
    r.max_in_flight_plans = max_in_flight_;
    const auto hs = metrics_horizons(*trace_, *cluster_);
    for (const auto& w : workflows_) {
        WorkflowOutcome o;
        o.id = w.id;
        o.arrival = w.arrival;
        o.completion = w.completion.value_or(kUnset);
        o.horizon = hs[static_cast<std::size_t>(w.id)];
        o.online_horizon = w.horizon;
        r.workflows.push_back(o);
    }
    return r;
}

SimResult run(const Trace& trace, const ClusterSpec& cluster, const PolicyConfig& policy, const SimConfig& cfg) {
    Simulator sim(trace, cluster, policy, cfg);
    return sim.run();
}

std::vector<Seconds> metrics_horizons(const Trace& trace, const ClusterSpec& cluster) {
    const Estimator clean(cluster, ErrorConfig{});
    const auto lens = true_output_lengths(trace);
    std::vector<Seconds> out;
    out.reserve(trace.workflows.size());
    for (const auto& wf : trace.workflows) {
        out.push_back(standalone_horizon(wf.calls, trace, clean, lens, nullptr));
    }
    return out;
}

}  // namespace agentsim
