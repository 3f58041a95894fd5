#include <doctest.h>

#include <random>

#include "agentsim/errors.hpp"
#include "agentsim/ledger.hpp"

using namespace agentsim;

namespace {

// Occupancy by direct summation.
Tokens brute_occupancy(const std::vector<DecodeInterval>& ivs, Seconds t) {
    Tokens used = 0;
    for (const auto& iv : ivs) {
        if (iv.start <= t && t < iv.end) used += iv.tokens;
    }
    return used;
}

bool brute_fits(const std::vector<DecodeInterval>& ivs, Tokens cap, Tokens m, Seconds s, Seconds e) {
    if (brute_occupancy(ivs, s) + m > cap) return false;
    for (const auto& iv : ivs) {
        if (iv.start > s && iv.start < e && brute_occupancy(ivs, iv.start) + m > cap) return false;
    }
    return true;
}

Seconds brute_earliest(const std::vector<DecodeInterval>& ivs, Tokens cap, Tokens m, Seconds dur, Seconds ready) {
    std::vector<Seconds> cand{ready};
    for (const auto& iv : ivs) {
        if (iv.end > ready) cand.push_back(iv.end);
    }
    std::sort(cand.begin(), cand.end());
    for (auto s : cand) {
        if (brute_fits(ivs, cap, m, s, s + dur)) return s;
    }
    return -1;
}

}  // namespace

TEST_SUITE("ledger") {
TEST_CASE("empty ledger admits at ready") {
    DecodeCapacityLedger l(1000);
    CHECK(earliest_feasible_decode_start(l, 500, 2.0, 3.0) == 3.0);
}

TEST_CASE("admission waits for the blocking interval") {
    DecodeCapacityLedger l(1000);
    start_decode(l, 600, 0.0, 5.0);
    CHECK(earliest_feasible_decode_start(l, 500, 1.0, 0.0) == 5.0);
    CHECK(earliest_feasible_decode_start(l, 400, 1.0, 0.0) == 0.0);
}

TEST_CASE("exact fit is allowed, one more token is not") {
    DecodeCapacityLedger l(1000);
    start_decode(l, 500, 0.0, 4.0);
    CHECK_NOTHROW(start_decode(l, 500, 0.0, 4.0));
    CHECK(l.occupancy_at(2.0) == 1000);
    CHECK(earliest_feasible_decode_start(l, 1, 1.0, 0.0) == 4.0);
    CHECK_THROWS_AS(start_decode(l, 1, 1.0, 1.0), CapacityViolation);
    CHECK(l.occupancy_at(2.0) == 1000);
}

TEST_CASE("intervals are half open") {
    DecodeCapacityLedger l(10);
    start_decode(l, 10, 0.0, 2.0);
    CHECK(l.occupancy_at(2.0) == 0);
    CHECK_NOTHROW(start_decode(l, 10, 2.0, 1.0));
    CHECK(l.peak_occupancy(0.0, 3.0) == 10);
    CHECK(l.peak_occupancy(3.0, 4.0) == 0);
}

TEST_CASE("a gap too short is skipped") {
    DecodeCapacityLedger l(10);
    start_decode(l, 8, 0.0, 1.0);
    start_decode(l, 8, 2.0, 3.0);
    // [1,2) is free but a 2 s call would overlap the second interval.
    CHECK(earliest_feasible_decode_start(l, 5, 2.0, 0.0) == 5.0);
    CHECK(earliest_feasible_decode_start(l, 5, 1.0, 0.0) == 1.0);
}

TEST_CASE("release drops finished intervals") {
    DecodeCapacityLedger l(10);
    start_decode(l, 3, 0.0, 1.0);
    start_decode(l, 3, 0.0, 5.0);
    l.release_until(1.0);
    CHECK(l.intervals().size() == 1);
    CHECK(l.occupancy_at(2.0) == 3);
}

TEST_CASE("random sequences agree with brute force") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> tok(1, 60);
    std::uniform_int_distribution<int> tick(0, 20);
    for (int round = 0; round < 300; ++round) {
        const Tokens cap = 100;
        DecodeCapacityLedger l(cap);
        std::vector<DecodeInterval> ref;
        for (int k = 0; k < 12; ++k) {
            const Tokens m = tok(rng);
            const Seconds dur = 0.5 * (1 + tick(rng));
            const Seconds ready = 0.5 * tick(rng);
            const Seconds s = l.earliest_feasible_start(m, dur, ready);
            REQUIRE(s == brute_earliest(ref, cap, m, dur, ready));
            l.insert({s, s + dur, m});
            ref.push_back({s, s + dur, m});
            for (int q = 0; q < 10; ++q) {
                const Seconds t = 0.25 * tick(rng) * 2;
                CHECK(l.occupancy_at(t) == brute_occupancy(ref, t));
                CHECK(l.occupancy_at(t) <= cap);
            }
        }
    }
}
}
