#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "agentsim/engine.hpp"

namespace agentsim {

struct AttainmentPoint {
    double alpha = 0.0;
    double fraction = 0.0;
};

struct OverheadRecord {
    std::size_t invocations = 0;
    double total_s = 0.0;
    double mean_ms = 0.0;
    double max_ms = 0.0;
    std::vector<std::size_t> queue_lengths;
};

// k-th smallest ratio, k = ceil(tau * N). Throws EmptyInput.
double req_at(double tau, std::span<const double> ratios);

// Share of ratios <= alpha at each grid point. Throws EmptyInput.
std::vector<AttainmentPoint> attainment_curve(std::span<const double> ratios, std::span<const double> alphas);

struct ReqPair {
    double req95 = 0.0;
    double req99 = 0.0;
};

// Percent change per metric, negative when the perturbed run did better.
ReqPair degradation(const ReqPair& base, const ReqPair& perturbed);

OverheadRecord overhead_summary(std::span<const PlannerRecord> records);

std::vector<double> completion_ratios(const SimResult& result);
ReqPair req_pair(const SimResult& result);

}  // namespace agentsim
