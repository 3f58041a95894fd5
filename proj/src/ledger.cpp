#include "agentsim/ledger.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include "agentsim/errors.hpp"

namespace agentsim {

DecodeCapacityLedger::DecodeCapacityLedger(Tokens capacity) : capacity_(capacity) {}

Tokens DecodeCapacityLedger::occupancy_at(Seconds t) const {
    auto j = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    return j == 0 ? 0 : level_[j - 1];
}

Tokens DecodeCapacityLedger::peak_occupancy(Seconds from, Seconds to) const {
    Tokens peak = occupancy_at(from);
    auto j = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), from) - times_.begin());
    for (; j < times_.size() && times_[j] < to; ++j) {
        peak = std::max(peak, level_[j]);
    }
    return peak;
}

Seconds DecodeCapacityLedger::earliest_feasible_start(Tokens demand, Seconds duration, Seconds ready) const {
    if (demand > capacity_) {
        throw std::invalid_argument("decode demand " + std::to_string(demand) + " exceeds capacity " +
                                    std::to_string(capacity_));
    }
    const Tokens limit = capacity_ - demand;
    const std::size_t n = times_.size();
    Seconds t = ready;
    while (true) {
        // j: first breakpoint strictly after t. The last level is zero, so a
        // blocking segment always has a successor breakpoint.
        auto j = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
        if (j > 0 && level_[j - 1] > limit) {
            t = times_[j];
            continue;
        }
        bool blocked = false;
        for (auto k = j; k < n && times_[k] < t + duration; ++k) {
            if (level_[k] > limit) {
                t = times_[k + 1];
                blocked = true;
                break;
            }
        }
        if (!blocked) {
            return t;
        }
    }
}

void DecodeCapacityLedger::insert(const DecodeInterval& iv) {
    if (!(iv.end > iv.start)) {
        throw CapacityViolation("decode interval must have positive length");
    }
    if (iv.tokens < 0) {
        throw CapacityViolation("decode interval must occupy a nonnegative token count");
    }
    const Tokens peak = peak_occupancy(iv.start, iv.end);
    if (peak + iv.tokens > capacity_) {
        throw CapacityViolation("admitting " + std::to_string(iv.tokens) + " tokens at t=" + std::to_string(iv.start) +
                                " overflows capacity " + std::to_string(capacity_) + " (peak " +
                                std::to_string(peak) + ")");
    }
    intervals_.push_back(iv);

    auto breakpoint = [this](Seconds t) {
        auto it = std::lower_bound(times_.begin(), times_.end(), t);
        auto i = static_cast<std::size_t>(it - times_.begin());
        if (it == times_.end() || *it != t) {
            const Tokens inherited = i == 0 ? 0 : level_[i - 1];
            times_.insert(it, t);
            level_.insert(level_.begin() + static_cast<std::ptrdiff_t>(i), inherited);
        }
        return i;
    };
    const auto s = breakpoint(iv.start);
    const auto e = breakpoint(iv.end);
    for (auto i = s; i < e; ++i) {
        level_[i] += iv.tokens;
    }
}

void DecodeCapacityLedger::release_until(Seconds t) {
    auto keep = std::remove_if(intervals_.begin(), intervals_.end(), [t](const DecodeInterval& iv) { return iv.end <= t; });
    if (keep == intervals_.end()) {
        return;
    }
    intervals_.erase(keep, intervals_.end());
    rebuild_profile();
}

void DecodeCapacityLedger::rebuild_profile() {
    std::map<Seconds, Tokens> delta;
    for (const auto& iv : intervals_) {
        delta[iv.start] += iv.tokens;
        delta[iv.end] -= iv.tokens;
    }
    times_.clear();
    level_.clear();
    Tokens running = 0;
    for (const auto& [time, d] : delta) {
        running += d;
        times_.push_back(time);
        level_.push_back(running);
    }
}

Seconds earliest_feasible_decode_start(const DecodeCapacityLedger& ledger, Tokens demand, Seconds duration,
                                       Seconds ready) {
    return ledger.earliest_feasible_start(demand, duration, ready);
}

void start_decode(DecodeCapacityLedger& ledger, Tokens demand, Seconds start, Seconds duration) {
    ledger.insert({start, start + duration, demand});
}

}  // namespace agentsim
