#include "agentsim/latency.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agentsim/errors.hpp"

namespace agentsim {

const ClassCoefficients& LatencyModel::coefficients(const std::string& gpu_class) const {
    auto it = classes.find(gpu_class);
    if (it == classes.end()) {
        throw UnknownClass(gpu_class);
    }
    return it->second;
}

std::vector<InstanceId> ClusterSpec::prefill_instances() const {
    std::vector<InstanceId> out;
    for (const auto& i : instances) {
        if (i.pool == Pool::Prefill) {
            out.push_back(i.id);
        }
    }
    return out;
}

std::vector<InstanceId> ClusterSpec::decode_instances() const {
    std::vector<InstanceId> out;
    for (const auto& i : instances) {
        if (i.pool == Pool::Decode) {
            out.push_back(i.id);
        }
    }
    return out;
}

double ClusterSpec::bandwidth_between(const std::string& src, const std::string& dst) const {
    auto it = bandwidth.find({src, dst});
    if (it == bandwidth.end()) {
        throw MissingBandwidthEntry(src, dst);
    }
    return it->second;
}

Tokens ClusterSpec::max_decode_capacity() const {
    Tokens best = 0;
    for (const auto& i : instances) {
        if (i.pool == Pool::Decode) {
            best = std::max(best, i.kv_capacity);
        }
    }
    return best;
}

void validate_cluster(const ClusterSpec& c) {
    auto fail = [](const std::string& what) { throw ConfigError("invalid cluster: " + what); };
    bool has_prefill = false;
    bool has_decode = false;
    for (std::size_t i = 0; i < c.instances.size(); ++i) {
        const auto& inst = c.instances[i];
        if (inst.id != static_cast<InstanceId>(i)) {
            fail("instance ids must be 0..n-1 in listed order (instance at position " + std::to_string(i) +
                 " has id " + std::to_string(inst.id) + ")");
        }
        if (inst.pool == Pool::Decode) {
            has_decode = true;
            if (inst.kv_capacity <= 0) {
                fail("decode instance " + std::to_string(inst.id) + " needs kv_capacity_tokens > 0");
            }
        } else {
            has_prefill = true;
            if (inst.kv_capacity != 0) {
                fail("prefill instance " + std::to_string(inst.id) + " must not carry a kv capacity");
            }
        }
        const auto it = c.model.classes.find(inst.gpu_class);
        if (it == c.model.classes.end()) {
            fail("gpu class '" + inst.gpu_class + "' has no latency coefficients");
        }
        const auto& k = it->second;
        if (c.model.mode == LatencyMode::Table) {
            if (!(k.prefill_s_per_token > 0.0) || !(k.decode_s_per_token > 0.0)) {
                fail("table coefficients for '" + inst.gpu_class + "' must be positive");
            }
        } else if (!(k.peak_flops > 0.0) || !(k.mem_bandwidth > 0.0)) {
            fail("roofline coefficients for '" + inst.gpu_class + "' must be positive");
        }
    }
    if (!has_prefill || !has_decode) {
        fail("need at least one prefill and one decode instance");
    }
    for (const auto& a : c.instances) {
        for (const auto& b : c.instances) {
            auto it = c.bandwidth.find({a.gpu_class, b.gpu_class});
            if (it == c.bandwidth.end()) {
                fail("bandwidth matrix misses " + a.gpu_class + " -> " + b.gpu_class);
            }
            if (!(it->second > 0.0)) {
                fail("bandwidth " + a.gpu_class + " -> " + b.gpu_class + " must be positive");
            }
        }
    }
    if (c.transfer_setup < 0.0) {
        fail("transfer_setup_s must be nonnegative");
    }
    if (!(c.model.profile.kv_bytes_per_token > 0.0)) {
        fail("kv_bytes_per_token must be positive");
    }
    if (c.model.mode == LatencyMode::Roofline) {
        const auto& p = c.model.profile;
        if (!(p.flops_per_token > 0.0) || !(p.prefill_bytes_per_token > 0.0) || !(p.decode_bytes_per_token > 0.0)) {
            fail("roofline mode needs positive flops_per_token, prefill_bytes_per_token, decode_bytes_per_token");
        }
    }
}

namespace {

Seconds prefill_from(Tokens input_len, const ClassCoefficients& k, const LatencyModel& m) {
    const auto len = static_cast<double>(input_len);
    if (m.mode == LatencyMode::Table) {
        return len * k.prefill_s_per_token;
    }
    const double compute = m.profile.flops_per_token * len / k.peak_flops;
    const double memory = m.profile.prefill_bytes_per_token * len / k.mem_bandwidth;
    return std::max(compute, memory);
}

// Batch-independent: each generated token costs the roofline time of one step.
Seconds decode_from(Tokens output_len, const ClassCoefficients& k, const LatencyModel& m) {
    const auto len = static_cast<double>(output_len);
    if (m.mode == LatencyMode::Table) {
        return len * k.decode_s_per_token;
    }
    const double compute = m.profile.flops_per_token / k.peak_flops;
    const double memory = m.profile.decode_bytes_per_token / k.mem_bandwidth;
    return len * std::max(compute, memory);
}

}  // namespace

Seconds prefill_time(Tokens input_len, const InstanceSpec& inst, const LatencyModel& m) {
    return prefill_from(input_len, m.coefficients(inst.gpu_class), m);
}

Seconds decode_time(Tokens output_len, const InstanceSpec& inst, const LatencyModel& m) {
    return decode_from(output_len, m.coefficients(inst.gpu_class), m);
}

Seconds prefill_time(const CallSpec& call, const InstanceSpec& inst, const LatencyModel& m) {
    return prefill_time(call.input_len, inst, m);
}

Seconds decode_time(const CallSpec& call, const CallNode& node, const InstanceSpec& inst, const LatencyModel& m,
                    bool use_predicted) {
    return decode_time(use_predicted ? node.predicted_output_len : call.output_len, inst, m);
}

double kv_size(Tokens input_len, const LatencyModel& m) {
    return static_cast<double>(input_len) * m.profile.kv_bytes_per_token;
}

Seconds transfer_latency(double kv_bytes, const std::string& src, const std::string& dst,
                         const ClusterSpec& cluster) {
    return cluster.transfer_setup + kv_bytes / cluster.bandwidth_between(src, dst);
}

Seconds scheduler_estimate(Seconds true_value, CallId call, const ErrorConfig& cfg) {
    if (cfg.mode == ErrorMode::Off) {
        return true_value;
    }
    return call % 2 == 0 ? true_value * (1.0 + cfg.epsilon) : true_value * (1.0 - cfg.epsilon);
}

Tokens predict_output_len(CallId call, Tokens true_output_len, const PredictorConfig& cfg) {
    if (cfg.mode == ErrorMode::Off) {
        return std::max<Tokens>(1, true_output_len);
    }
    const double factor = call % 2 == 0 ? 1.0 + cfg.epsilon : 1.0 - cfg.epsilon;
    const auto scaled = std::llround(static_cast<double>(true_output_len) * factor);
    return std::max<Tokens>(1, scaled);
}

Estimator::Estimator(const ClusterSpec& cluster, ErrorConfig error)
    : cluster_(&cluster), error_(error) {
    const auto n = cluster.instances.size();
    coeffs_.resize(n);
    bandwidth_.assign(n, std::vector<double>(n, 0.0));
    for (const auto& inst : cluster.instances) {
        coeffs_[static_cast<std::size_t>(inst.id)] = &cluster.model.coefficients(inst.gpu_class);
    }
    for (const auto& p : cluster.instances) {
        if (p.pool != Pool::Prefill) {
            continue;
        }
        for (const auto& d : cluster.instances) {
            if (d.pool == Pool::Decode) {
                bandwidth_[static_cast<std::size_t>(p.id)][static_cast<std::size_t>(d.id)] =
                    cluster.bandwidth_between(p.gpu_class, d.gpu_class);
            }
        }
    }
}

Seconds Estimator::clean_prefill(Tokens input_len, InstanceId p) const {
    return prefill_from(input_len, *coeffs_[static_cast<std::size_t>(p)], cluster_->model);
}

Seconds Estimator::clean_decode(Tokens output_len, InstanceId d) const {
    return decode_from(output_len, *coeffs_[static_cast<std::size_t>(d)], cluster_->model);
}

Seconds Estimator::prefill(CallId call, Tokens input_len, InstanceId p) const {
    return scheduler_estimate(clean_prefill(input_len, p), call, error_);
}

Seconds Estimator::decode(CallId call, Tokens predicted_output_len, InstanceId d) const {
    return scheduler_estimate(clean_decode(predicted_output_len, d), call, error_);
}

Seconds Estimator::transfer(Tokens input_len, InstanceId p, InstanceId d) const {
    const double bytes = kv_size(input_len, cluster_->model);
    return cluster_->transfer_setup + bytes / bandwidth_[static_cast<std::size_t>(p)][static_cast<std::size_t>(d)];
}

}  // namespace agentsim
