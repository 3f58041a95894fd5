#include "agentsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "agentsim/errors.hpp"

namespace agentsim {

double req_at(double tau, std::span<const double> ratios) {
    if (ratios.empty()) {
        throw EmptyInput();
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("tau must lie in (0, 1]");
    }
    std::vector<double> sorted(ratios.begin(), ratios.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    // Guard against tau*N landing a hair above an integer through rounding.
    const double scaled = tau * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * scaled));
    k = std::clamp<std::size_t>(k, 1, n);
    return sorted[k - 1];
}

std::vector<AttainmentPoint> attainment_curve(std::span<const double> ratios, std::span<const double> alphas) {
    if (ratios.empty()) {
        throw EmptyInput();
    }
    std::vector<double> sorted(ratios.begin(), ratios.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    std::vector<AttainmentPoint> out;
    out.reserve(alphas.size());
    for (double a : alphas) {
        const auto hit = std::upper_bound(sorted.begin(), sorted.end(), a) - sorted.begin();
        out.push_back({a, static_cast<double>(hit) / n});
    }
    return out;
}

ReqPair degradation(const ReqPair& base, const ReqPair& perturbed) {
    return {100.0 * (perturbed.req95 - base.req95) / base.req95, 100.0 * (perturbed.req99 - base.req99) / base.req99};
}

OverheadRecord overhead_summary(std::span<const PlannerRecord> records) {
    OverheadRecord r;
    r.invocations = records.size();
    for (const auto& p : records) {
        r.total_s += p.wall_us * 1e-6;
        r.max_ms = std::max(r.max_ms, p.wall_us * 1e-3);
        r.queue_lengths.push_back(p.queue_len);
    }
    if (r.invocations > 0) {
        r.mean_ms = r.total_s * 1e3 / static_cast<double>(r.invocations);
    }
    return r;
}

std::vector<double> completion_ratios(const SimResult& result) {
    std::vector<double> out;
    out.reserve(result.workflows.size());
    for (const auto& w : result.workflows) {
        out.push_back(w.ratio());
    }
    return out;
}

ReqPair req_pair(const SimResult& result) {
    const auto ratios = completion_ratios(result);
    return {req_at(0.95, ratios), req_at(0.99, ratios)};
}

}  // namespace agentsim
