#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agentsim/core.hpp"

namespace agentsim {

enum class Pool { Prefill, Decode };

enum class LatencyMode { Table, Roofline };

// Per gpu-class service coefficients. Table mode reads the two per-token
// times; roofline mode reads peak_flops and mem_bandwidth.
struct ClassCoefficients {
    double prefill_s_per_token = 0.0;
    double decode_s_per_token = 0.0;
    double peak_flops = 0.0;
    double mem_bandwidth = 0.0;
};

struct ModelProfile {
    std::string name;
    double param_bytes = 0.0;
    double kv_bytes_per_token = 0.0;
    // Roofline inputs.
    double flops_per_token = 0.0;
    double prefill_bytes_per_token = 0.0;
    double decode_bytes_per_token = 0.0;
};

struct LatencyModel {
    LatencyMode mode = LatencyMode::Table;
    ModelProfile profile;
    std::map<std::string, ClassCoefficients> classes;

    // Throws UnknownClass.
    const ClassCoefficients& coefficients(const std::string& gpu_class) const;
};

struct InstanceSpec {
    InstanceId id = 0;
    Pool pool = Pool::Prefill;
    std::string gpu_class;
    Tokens kv_capacity = 0;  // decode pool only
};

struct ClusterSpec {
    std::string name;
    std::vector<InstanceSpec> instances;  // instances[i].id == i
    std::map<std::pair<std::string, std::string>, double> bandwidth;  // bytes/second
    Seconds transfer_setup = 0.0;
    LatencyModel model;

    const InstanceSpec& instance(InstanceId id) const { return instances.at(static_cast<std::size_t>(id)); }
    std::vector<InstanceId> prefill_instances() const;
    std::vector<InstanceId> decode_instances() const;
    // Throws MissingBandwidthEntry.
    double bandwidth_between(const std::string& src, const std::string& dst) const;
    Tokens max_decode_capacity() const;
};

// Throws ConfigError describing the first broken invariant.
void validate_cluster(const ClusterSpec& cluster);

}  // namespace agentsim
