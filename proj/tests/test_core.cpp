#include <doctest.h>

#include <algorithm>

#include "agentsim/core.hpp"
#include "agentsim/errors.hpp"
#include "support.hpp"

using namespace agentsim;
using agentsim::testing::trace_of;

namespace {

bool has_kind(const std::vector<Violation>& v, Violation::Kind k) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == k; });
}

WorkflowRecord wf_record(std::int64_t id, std::optional<Seconds> arrival, std::vector<CallRecord> calls) {
    WorkflowRecord r;
    r.workflow_id = id;
    r.arrival = arrival;
    r.calls = std::move(calls);
    return r;
}

CallRecord call_record(std::int64_t id, std::vector<std::int64_t> parents, Tokens in = 10, Tokens out = 5) {
    CallRecord c;
    c.call_id = id;
    c.parents = std::move(parents);
    c.input_len = in;
    c.output_len = out;
    return c;
}

// A -> {B, C} -> D
Trace diamond() { return trace_of({{0.0, {{{}}, {{0}}, {{0}}, {{1, 2}}}}}); }

}  // namespace

TEST_SUITE("core") {
TEST_CASE("chain validates") {
    TraceRecords r{wf_record(1, 0.0, {call_record(10, {}), call_record(11, {10}), call_record(12, {11})})};
    CHECK(validate_trace(r).empty());
}

TEST_CASE("two-cycle is reported") {
    TraceRecords r{wf_record(1, 0.0, {call_record(1, {2}), call_record(2, {1})})};
    auto v = validate_trace(r);
    CHECK(has_kind(v, Violation::Kind::CycleDetected));
    CHECK_THROWS_AS(build_trace(r), TraceError);
}

TEST_CASE("dangling parent is reported") {
    TraceRecords r{wf_record(1, 0.0, {call_record(1, {}), call_record(2, {999})})};
    CHECK(has_kind(validate_trace(r), Violation::Kind::DanglingParent));
}

TEST_CASE("parent in another workflow does not resolve") {
    TraceRecords r{wf_record(1, 0.0, {call_record(1, {})}), wf_record(2, 1.0, {call_record(2, {1})})};
    CHECK(has_kind(validate_trace(r), Violation::Kind::DanglingParent));
}

TEST_CASE("lengths and arrival are checked") {
    TraceRecords r{wf_record(1, std::nullopt, {call_record(1, {}, 0, 5), call_record(2, {}, 5, -1)})};
    auto v = validate_trace(r);
    CHECK(has_kind(v, Violation::Kind::MissingArrival));
    CHECK(std::count_if(v.begin(), v.end(),
                        [](const Violation& x) { return x.kind == Violation::Kind::NonPositiveLength; }) == 2);
}

TEST_CASE("duplicate call ids are reported") {
    TraceRecords r{wf_record(1, 0.0, {call_record(3, {}), call_record(3, {})})};
    CHECK(has_kind(validate_trace(r), Violation::Kind::DuplicateId));
}

TEST_CASE("build_trace renumbers densely and keeps source ids") {
    TraceRecords r{wf_record(40, 0.5, {call_record(100, {}), call_record(7, {100})}),
                   wf_record(3, 1.5, {call_record(55, {})})};
    auto t = build_trace(r);
    REQUIRE(t.calls.size() == 3);
    CHECK(t.call(0).source_id == 100);
    CHECK(t.call(1).parents == std::vector<CallId>{0});
    CHECK(t.call(0).children == std::vector<CallId>{1});
    CHECK(t.workflow(1).source_id == 3);
    CHECK(t.workflow(1).calls == std::vector<CallId>{2});
    CHECK(t.workflow(1).arrival == 1.5);
}

TEST_CASE("topological order puts parents first") {
    // Listed child-first on purpose.
    TraceRecords r{wf_record(0, 0.0, {call_record(2, {1}), call_record(1, {0}), call_record(0, {})})};
    auto t = build_trace(r);
    const auto& wf = t.workflow(0);
    CHECK(wf.calls == std::vector<CallId>{2, 1, 0});
    CHECK(wf.sources == std::vector<CallId>{2});
    CHECK(t.call(2).topo_index == 0);
    CHECK(t.call(0).topo_index == 2);
}

TEST_CASE("reveal_children on a diamond") {
    auto t = diamond();
    auto nodes = make_call_nodes(t);
    auto w = make_workflow_state(t.workflow(0));
    CHECK(reveal_sources(w, t, nodes, 0.0) == std::vector<CallId>{0});
    CHECK(runnable_frontier(w, nodes) == std::set<CallId>{0});

    w.completed.insert(0);
    nodes[0].state = CallState::Complete;
    CHECK(reveal_children(w, 0, t, nodes, 1.0) == std::vector<CallId>{1, 2});
    CHECK(nodes[1].state == CallState::WaitingPrefill);
    CHECK(nodes[1].entered_at(CallState::WaitingPrefill) == 1.0);
    CHECK(runnable_frontier(w, nodes) == std::set<CallId>{1, 2});

    w.completed.insert(1);
    nodes[1].state = CallState::Complete;
    CHECK(reveal_children(w, 1, t, nodes, 2.0).empty());
    CHECK(runnable_frontier(w, nodes) == std::set<CallId>{2});

    w.completed.insert(2);
    nodes[2].state = CallState::Complete;
    CHECK(reveal_children(w, 2, t, nodes, 3.0) == std::vector<CallId>{3});
    // Revealing again is a no-op.
    CHECK(unblocked_children(w, 2, t).empty());
}

TEST_CASE("chain reveals its single child") {
    auto t = trace_of({{0.0, {{{}}, {{0}}}}});
    auto nodes = make_call_nodes(t);
    auto w = make_workflow_state(t.workflow(0));
    reveal_sources(w, t, nodes, 0.0);
    w.completed.insert(0);
    nodes[0].state = CallState::Complete;
    CHECK(reveal_children(w, 0, t, nodes, 0.0) == std::vector<CallId>{1});
}

TEST_CASE("all complete leaves an empty frontier") {
    auto t = diamond();
    auto nodes = make_call_nodes(t);
    auto w = make_workflow_state(t.workflow(0));
    for (auto& n : nodes) {
        w.revealed.insert(n.id);
        w.completed.insert(n.id);
        n.state = CallState::Complete;
    }
    CHECK(runnable_frontier(w, nodes).empty());
}

TEST_CASE("unknown call throws") {
    auto t = diamond();
    auto w = make_workflow_state(t.workflow(0));
    CHECK_THROWS_AS(unblocked_children(w, 99, t), UnknownCall);
}
}
