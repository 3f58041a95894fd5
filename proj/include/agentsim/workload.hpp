#pragma once

#include <cstdint>
#include <map>
#include <string_view>

#include "agentsim/core.hpp"

namespace agentsim {

enum class WorkloadKind { Chain, FuncCall, Tree, Mixed };

// chain|funccall|tree|mixed. Throws ConfigError.
WorkloadKind parse_workload_kind(std::string_view name);
std::string_view to_string(WorkloadKind k);

struct TokenRange {
    Tokens lo = 1;
    Tokens hi = 1;
};

struct GenConfig {
    WorkloadKind kind = WorkloadKind::Mixed;
    int n_workflows = 100;
    double rate = 10.0;  // workflows per second
    std::uint64_t seed = 1;

    double chain_mean_len = 6.0;
    int chain_max_len = 20;
    TokenRange chain_input{500, 2000};
    TokenRange chain_output{100, 600};

    int funccall_min_len = 2;
    int funccall_max_len = 4;
    TokenRange funccall_input{200, 800};
    TokenRange funccall_output{20, 100};
    // Tool execution between a call and the next one it unblocks.
    double tool_delay_lo = 0.0;
    double tool_delay_hi = 0.0;

    int tree_branching = 2;
    int tree_depth = 2;
    TokenRange tree_input{500, 1500};
    TokenRange tree_output{100, 400};
};

// Throws ConfigError naming the first bad field.
void validate_gen_config(const GenConfig& cfg);

// Deterministic per seed; each workflow draws from its own stream so the
// result does not depend on generation order.
TraceRecords gen_trace(const GenConfig& cfg);

struct TraceSummary {
    std::size_t workflows = 0;
    std::size_t calls = 0;
    std::map<int, std::size_t> depth_histogram;  // longest path (calls) -> workflows
    std::map<int, std::size_t> width_histogram;  // widest level -> workflows
    int max_width = 0;
    int max_depth = 0;
    // p50, p90, p99, max
    std::array<Tokens, 4> input_pct{};
    std::array<Tokens, 4> output_pct{};
    Seconds first_arrival = 0.0;
    Seconds last_arrival = 0.0;
};

TraceSummary describe_trace(const Trace& trace);

}  // namespace agentsim
