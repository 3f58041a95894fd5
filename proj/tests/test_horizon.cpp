#include <doctest.h>

#include <random>

#include "agentsim/errors.hpp"
#include "agentsim/horizon.hpp"
#include "oracles/horizon_oracle.hpp"
#include "support.hpp"

using namespace agentsim;
using namespace agentsim::testing;

namespace {

Seconds horizon_of(const Trace& t, const ClusterSpec& c, std::vector<CallId> ids) {
    Estimator est(c);
    auto lens = true_output_lengths(t);
    return standalone_horizon(ids, t, est, lens);
}

}  // namespace

TEST_SUITE("horizon") {
TEST_CASE("two-call chain on 1P+1D") {
    auto c = unit_cluster(1.0, 2.0, 0.5);
    auto t = trace_of({{0.0, {{{}}, {{0}}}}});
    CHECK(horizon_of(t, c, {0, 1}) == doctest::Approx(7.0));
}

TEST_CASE("chain of k identical calls is k path times") {
    auto c = unit_cluster(1.0, 2.0, 0.5);
    for (int k = 1; k <= 5; ++k) {
        std::vector<CallDef> calls(static_cast<std::size_t>(k));
        for (int i = 1; i < k; ++i) calls[static_cast<std::size_t>(i)].parents = {i - 1};
        auto t = trace_of({{0.0, calls}});
        Estimator est(c);
        CHECK(metrics_horizon(t, 0, est) == doctest::Approx(3.5 * k));
    }
}

TEST_CASE("single call takes the fastest pair") {
    auto c = table_cluster({{"slow", 2.0, 1.0, 100}, {"fast", 1.0, 1.0, 100}},
                           {{"slow", 1.0, 3.0, 100}, {"fast", 1.0, 1.0, 100}}, 1.0, 10.0, 1.0);
    auto t = trace_of({{0.0, {{{}, 2, 2}}}});
    const Seconds h = horizon_of(t, c, {0});
    CHECK(h == doctest::Approx(oracle::single_call_path(t.call(0), c)));
    // fast/fast: 2 + 0.2 + 2
    CHECK(h == doctest::Approx(4.2));
}

TEST_CASE("parallel calls on two pairs overlap perfectly") {
    auto c = table_cluster({{"G", 1, 2, 100}, {"G", 1, 2, 100}}, {{"G", 1, 2, 100}, {"G", 1, 2, 100}}, 1.0, 2.0);
    auto t = trace_of({{0.0, {{{}}, {{}}}}});
    CHECK(horizon_of(t, c, {0, 1}) == doctest::Approx(horizon_of(t, c, {0})));
}

TEST_CASE("capacity serialises decodes") {
    // Both fit alone but not together.
    auto c = table_cluster({{"G", 1, 2, 0}, {"G", 1, 2, 0}}, {{"G", 1, 2, 3}}, 1.0, 2.0);
    auto t = trace_of({{0.0, {{{}}, {{}}}}});
    auto s = isolated_schedule(std::vector<CallId>{0, 1}, t, Estimator(c), true_output_lengths(t));
    REQUIRE(s.placements.size() == 2);
    CHECK(s.placements[1].decode_start == doctest::Approx(s.placements[0].decode_end));
    CHECK(s.makespan == doctest::Approx(oracle::isolated_makespan(t, t.workflow(0), c)));
}

TEST_CASE("refine grows with a chained child and ignores a parallel sibling") {
    auto c = table_cluster({{"G", 1, 2, 100}, {"G", 1, 2, 100}}, {{"G", 1, 2, 100}, {"G", 1, 2, 100}}, 1.0, 2.0);
    auto t = trace_of({{0.0, {{{}}, {{0}}, {{}}}}});
    Estimator est(c);
    auto lens = true_output_lengths(t);
    HorizonRecord rec;
    std::vector<CallId> revealed{0};
    const Seconds h0 = refine_on_reveal(rec, revealed, t, est, lens);
    CHECK(refine_on_reveal(rec, revealed, t, est, lens) == h0);

    revealed.push_back(1);
    const Seconds h1 = refine_on_reveal(rec, revealed, t, est, lens);
    CHECK(h1 - h0 == doctest::Approx(oracle::single_call_path(t.call(1), c)));

    revealed.push_back(2);
    CHECK(refine_on_reveal(rec, revealed, t, est, lens) == doctest::Approx(h1));
}

TEST_CASE("observed durations replace estimates for completed calls") {
    auto c = unit_cluster(1.0, 2.0, 0.5);
    auto t = trace_of({{0.0, {{{}}, {{0}}}}});
    Estimator est(c);
    auto lens = true_output_lengths(t);
    HorizonRecord rec;
    std::vector<CallId> all{0, 1};
    rec.observed[0] = {1.5, 0.5, 3.0};
    CHECK(refine_on_reveal(rec, all, t, est, lens, true) == doctest::Approx(5.0 + 3.5));
    CHECK(refine_on_reveal(rec, all, t, est, lens, false) == doctest::Approx(7.0));
}

TEST_CASE("final online horizon equals the metrics horizon without observations") {
    std::mt19937_64 rng(5);
    auto c = table_cluster({{"A", 2e-3, 2e-2, 0}, {"B", 1e-3, 1e-2, 0}}, {{"A", 2e-3, 2e-2, 800}, {"B", 1e-3, 1e-2, 1500}},
                           1.0, 1e6, 5e5);
    for (int i = 0; i < 20; ++i) {
        auto t = trace_of({{0.0, random_dag(rng, 6, 400, 300)}});
        Estimator est(c);
        auto lens = true_output_lengths(t);
        HorizonRecord rec;
        std::vector<CallId> grown;
        Seconds prev = 0.0;
        for (auto id : t.workflow(0).calls) {
            grown.push_back(id);
            const Seconds h = refine_on_reveal(rec, grown, t, est, lens, false);
            CHECK(h >= prev - 1e-12);
            prev = h;
        }
        CHECK(prev == metrics_horizon(t, 0, est));
    }
}

TEST_CASE("oversized call has no feasible decode") {
    auto c = unit_cluster(1.0, 1.0, 0.0, 5);
    auto t = trace_of({{0.0, {{{}, 4, 4}}}});
    CHECK_THROWS_AS(horizon_of(t, c, {0}), NoFeasibleDecode);
}
}
