#pragma once

#include <vector>

#include "agentsim/cluster.hpp"
#include "agentsim/core.hpp"

namespace agentsim {

// Ground-truth service times. These never see estimation error.

Seconds prefill_time(Tokens input_len, const InstanceSpec& inst, const LatencyModel& m);
Seconds decode_time(Tokens output_len, const InstanceSpec& inst, const LatencyModel& m);

// Convenience overloads over a call. `use_predicted` selects L̂_out for
// planner projections; the simulator always passes false.
Seconds prefill_time(const CallSpec& call, const InstanceSpec& inst, const LatencyModel& m);
Seconds decode_time(const CallSpec& call, const CallNode& node, const InstanceSpec& inst, const LatencyModel& m,
                    bool use_predicted);

double kv_size(Tokens input_len, const LatencyModel& m);

Seconds transfer_latency(double kv_bytes, const std::string& src, const std::string& dst, const ClusterSpec& cluster);

enum class ErrorMode { Off, DeterministicMultiplicative };

struct ErrorConfig {
    double epsilon = 0.0;
    ErrorMode mode = ErrorMode::Off;
};

// Even call ids are overestimated by (1+eps), odd ones underestimated by (1-eps).
Seconds scheduler_estimate(Seconds true_value, CallId call, const ErrorConfig& cfg);

struct PredictorConfig {
    double epsilon = 0.0;
    ErrorMode mode = ErrorMode::Off;
};

Tokens predict_output_len(CallId call, Tokens true_output_len, const PredictorConfig& cfg);

// Decode demand m(c) = L_in + L̂_out.
inline Tokens decode_demand(Tokens input_len, Tokens predicted_output_len) {
    return input_len + predicted_output_len;
}

// Scheduler-facing estimator. Caches per-instance coefficients and the
// per-pair transfer parameters so planners can evaluate P×D pairs cheaply.
class Estimator {
public:
    Estimator(const ClusterSpec& cluster, ErrorConfig error = {});

    const ClusterSpec& cluster() const { return *cluster_; }
    const ErrorConfig& error() const { return error_; }

    // Scheduler-visible estimates (error applied).
    Seconds prefill(CallId call, Tokens input_len, InstanceId p) const;
    Seconds decode(CallId call, Tokens predicted_output_len, InstanceId d) const;
    // Transfer is not perturbed.
    Seconds transfer(Tokens input_len, InstanceId p, InstanceId d) const;

    // Error-free variants.
    Seconds clean_prefill(Tokens input_len, InstanceId p) const;
    Seconds clean_decode(Tokens output_len, InstanceId d) const;

private:
    const ClusterSpec* cluster_;
    ErrorConfig error_;
    std::vector<const ClassCoefficients*> coeffs_;
    std::vector<std::vector<double>> bandwidth_;  // [p][d], zero unless p is prefill and d decode
};

}  // namespace agentsim
