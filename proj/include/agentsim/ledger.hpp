#pragma once

#include <vector>

#include "agentsim/core.hpp"

namespace agentsim {

struct DecodeInterval {
    Seconds start = 0.0;
    Seconds end = 0.0;  // exclusive
    Tokens tokens = 0;
};

// Token occupancy of one decode instance over time. Keeps the raw interval
// list plus a step-function profile so admission queries are linear in the
// number of breakpoints. Intervals are half-open: a call ending at t frees its
// tokens for a call starting at t.
class DecodeCapacityLedger {
public:
    explicit DecodeCapacityLedger(Tokens capacity = 0);

    Tokens capacity() const { return capacity_; }
    const std::vector<DecodeInterval>& intervals() const { return intervals_; }
    bool empty() const { return intervals_.empty(); }

    Tokens occupancy_at(Seconds t) const;
    // Maximum occupancy over [from, to).
    Tokens peak_occupancy(Seconds from, Seconds to) const;

    // Smallest t >= ready at which [t, t+duration) can host `demand` more
    // tokens. Requires demand <= capacity().
    Seconds earliest_feasible_start(Tokens demand, Seconds duration, Seconds ready) const;

    // Throws CapacityViolation if the interval would overflow the capacity
    // anywhere in [start, end).
    void insert(const DecodeInterval& iv);

    // Drops intervals that ended at or before t.
    void release_until(Seconds t);

private:
    void rebuild_profile();

    Tokens capacity_;
    std::vector<DecodeInterval> intervals_;
    // level_[i] holds on [times_[i], times_[i+1]); zero before times_[0] and
    // from times_.back() on.
    std::vector<Seconds> times_;
    std::vector<Tokens> level_;
};

Seconds earliest_feasible_decode_start(const DecodeCapacityLedger& ledger, Tokens demand, Seconds duration,
                                       Seconds ready);

// Admits a call: occupies `demand` tokens (m(c), predicted length) for the
// ground-truth `duration`.
void start_decode(DecodeCapacityLedger& ledger, Tokens demand, Seconds start, Seconds duration);

}  // namespace agentsim
