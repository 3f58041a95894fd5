#include "agentsim/core.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "agentsim/errors.hpp"

namespace agentsim {

std::string_view to_string(Stage s) {
    return s == Stage::Prefill ? "prefill" : "decode";
}

std::string_view to_string(CallState s) {
    switch (s) {
    case CallState::Hidden: return "hidden";
    case CallState::WaitingPrefill: return "waiting_prefill";
    case CallState::Prefill: return "prefill";
    case CallState::Transfer: return "transfer";
    case CallState::WaitingDecode: return "waiting_decode";
    case CallState::Decode: return "decode";
    case CallState::Complete: return "complete";
    }
    return "?";
}

std::string_view to_string(Violation::Kind k) {
    switch (k) {
    case Violation::Kind::CycleDetected: return "CycleDetected";
    case Violation::Kind::DanglingParent: return "DanglingParent";
    case Violation::Kind::NonPositiveLength: return "NonPositiveLength";
    case Violation::Kind::MissingArrival: return "MissingArrival";
    case Violation::Kind::DuplicateId: return "DuplicateId";
    }
    return "?";
}

namespace {

// Kahn's algorithm over positions within one workflow, smallest position
// first. Returns fewer positions than the workflow has calls iff there is a
// cycle. Parents that do not resolve are ignored here.
std::vector<std::size_t> topo_positions(const WorkflowRecord& wf,
                                        const std::unordered_map<std::int64_t, std::size_t>& pos) {
    const std::size_t n = wf.calls.size();
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::unordered_set<std::int64_t> seen;
        for (auto parent : wf.calls[i].parents) {
            auto it = pos.find(parent);
            if (it == pos.end() || !seen.insert(parent).second) {
                continue;
            }
            children[it->second].push_back(i);
            ++indegree[i];
        }
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] == 0) {
            ready.push(i);
        }
    }
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        auto i = ready.top();
        ready.pop();
        order.push_back(i);
        for (auto c : children[i]) {
            if (--indegree[c] == 0) {
                ready.push(c);
            }
        }
    }
    return order;
}

std::unordered_map<std::int64_t, std::size_t> positions_of(const WorkflowRecord& wf) {
    std::unordered_map<std::int64_t, std::size_t> pos;
    for (std::size_t i = 0; i < wf.calls.size(); ++i) {
        pos.emplace(wf.calls[i].call_id, i);
    }
    return pos;
}

}  // namespace

std::vector<Violation> validate_trace(const TraceRecords& records) {
    std::vector<Violation> out;
    std::unordered_set<std::int64_t> workflow_ids;
    std::unordered_set<std::int64_t> call_ids;
    for (const auto& wf : records) {
        if (!workflow_ids.insert(wf.workflow_id).second) {
            out.push_back({Violation::Kind::DuplicateId, wf.workflow_id,
                           "duplicate workflow id " + std::to_string(wf.workflow_id)});
        }
        if (!wf.arrival || *wf.arrival < 0.0) {
            out.push_back({Violation::Kind::MissingArrival, wf.workflow_id,
                           "workflow " + std::to_string(wf.workflow_id) + " has no valid arrival_time_s"});
        }
        const auto pos = positions_of(wf);
        for (const auto& c : wf.calls) {
            if (!call_ids.insert(c.call_id).second) {
                out.push_back({Violation::Kind::DuplicateId, c.call_id,
                               "duplicate call id " + std::to_string(c.call_id)});
            }
            if (c.input_len < 1 || c.output_len < 1) {
                out.push_back({Violation::Kind::NonPositiveLength, c.call_id,
                               "call " + std::to_string(c.call_id) + " has a non-positive token length"});
            }
            if (c.reveal_delay < 0.0) {
                out.push_back({Violation::Kind::NonPositiveLength, c.call_id,
                               "call " + std::to_string(c.call_id) + " has a negative reveal delay"});
            }
            for (auto parent : c.parents) {
                if (!pos.contains(parent)) {
                    out.push_back({Violation::Kind::DanglingParent, c.call_id,
                                   "call " + std::to_string(c.call_id) + " references parent " +
                                       std::to_string(parent) + " outside workflow " +
                                       std::to_string(wf.workflow_id)});
                }
            }
        }
        if (topo_positions(wf, pos).size() != wf.calls.size()) {
            out.push_back({Violation::Kind::CycleDetected, wf.workflow_id,
                           "workflow " + std::to_string(wf.workflow_id) + " contains a dependency cycle"});
        }
    }
    return out;
}

Trace build_trace(const TraceRecords& records) {
    if (auto violations = validate_trace(records); !violations.empty()) {
        std::ostringstream msg;
        msg << "invalid trace:";
        for (const auto& v : violations) {
            msg << "\n  " << to_string(v.kind) << ": " << v.message;
        }
        throw TraceError(msg.str());
    }

    Trace trace;
    trace.workflows.reserve(records.size());
    for (const auto& rec : records) {
        WorkflowSpec wf;
        wf.id = static_cast<WorkflowId>(trace.workflows.size());
        wf.arrival = *rec.arrival;
        wf.source_id = rec.workflow_id;

        const auto pos = positions_of(rec);
        const auto base = static_cast<CallId>(trace.calls.size());
        for (std::size_t i = 0; i < rec.calls.size(); ++i) {
            const auto& c = rec.calls[i];
            CallSpec spec;
            spec.id = base + static_cast<CallId>(i);
            spec.workflow = wf.id;
            spec.input_len = c.input_len;
            spec.output_len = c.output_len;
            spec.reveal_delay = c.reveal_delay;
            spec.source_id = c.call_id;
            for (auto parent : c.parents) {
                auto pid = base + static_cast<CallId>(pos.at(parent));
                if (std::find(spec.parents.begin(), spec.parents.end(), pid) == spec.parents.end()) {
                    spec.parents.push_back(pid);
                }
            }
            std::sort(spec.parents.begin(), spec.parents.end());
            trace.calls.push_back(std::move(spec));
        }
        auto order = topo_positions(rec, pos);
        for (std::size_t k = 0; k < order.size(); ++k) {
            auto& spec = trace.calls[static_cast<std::size_t>(base) + order[k]];
            spec.topo_index = static_cast<int>(k);
            wf.calls.push_back(spec.id);
            if (spec.parents.empty()) {
                wf.sources.push_back(spec.id);
            }
        }
        std::sort(wf.sources.begin(), wf.sources.end());
        trace.workflows.push_back(std::move(wf));
    }
    for (const auto& c : trace.calls) {
        for (auto p : c.parents) {
            trace.calls[static_cast<std::size_t>(p)].children.push_back(c.id);
        }
    }
    return trace;
}

TraceRecords to_records(const Trace& trace) {
    TraceRecords out;
    out.reserve(trace.workflows.size());
    for (const auto& wf : trace.workflows) {
        WorkflowRecord rec;
        rec.workflow_id = wf.id;
        rec.arrival = wf.arrival;
        auto ids = wf.calls;
        std::sort(ids.begin(), ids.end());
        for (auto id : ids) {
            const auto& c = trace.call(id);
            CallRecord cr;
            cr.call_id = c.id;
            cr.parents.assign(c.parents.begin(), c.parents.end());
            cr.input_len = c.input_len;
            cr.output_len = c.output_len;
            cr.reveal_delay = c.reveal_delay;
            rec.calls.push_back(std::move(cr));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CallNode> make_call_nodes(const Trace& trace) {
    std::vector<CallNode> nodes(trace.calls.size());
    for (const auto& c : trace.calls) {
        auto& n = nodes[static_cast<std::size_t>(c.id)];
        n.id = c.id;
        n.workflow = c.workflow;
        n.predicted_output_len = c.output_len;
    }
    return nodes;
}

WorkflowState make_workflow_state(const WorkflowSpec& wf) {
    WorkflowState w;
    w.id = wf.id;
    w.arrival = wf.arrival;
    return w;
}

void reveal_call(WorkflowState& w, CallNode& node, Seconds now) {
    node.state = CallState::WaitingPrefill;
    node.entered[lifecycle_index(CallState::WaitingPrefill)] = now;
    w.revealed.insert(node.id);
}

std::vector<CallId> reveal_sources(WorkflowState& w, const Trace& trace, std::span<CallNode> nodes, Seconds now) {
    const auto& wf = trace.workflow(w.id);
    for (auto id : wf.sources) {
        reveal_call(w, nodes[static_cast<std::size_t>(id)], now);
    }
    return wf.sources;
}

std::vector<CallId> unblocked_children(const WorkflowState& w, CallId completed_call, const Trace& trace) {
    if (completed_call < 0 || static_cast<std::size_t>(completed_call) >= trace.calls.size() ||
        trace.call(completed_call).workflow != w.id) {
        throw UnknownCall(completed_call);
    }
    std::vector<CallId> out;
    for (auto child : trace.call(completed_call).children) {
        if (w.revealed.contains(child)) {
            continue;
        }
        const auto& parents = trace.call(child).parents;
        bool ready = std::all_of(parents.begin(), parents.end(), [&](CallId p) { return w.completed.contains(p); });
        if (ready) {
            out.push_back(child);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CallId> reveal_children(WorkflowState& w, CallId completed_call, const Trace& trace,
                                    std::span<CallNode> nodes, Seconds now) {
    auto out = unblocked_children(w, completed_call, trace);
    for (auto id : out) {
        reveal_call(w, nodes[static_cast<std::size_t>(id)], now);
    }
    return out;
}

std::set<CallId> runnable_frontier(const WorkflowState& w, std::span<const CallNode> nodes) {
    std::set<CallId> out;
    for (auto id : w.revealed) {
        if (nodes[static_cast<std::size_t>(id)].state == CallState::WaitingPrefill) {
            out.insert(id);
        }
    }
    return out;
}

}  // namespace agentsim
