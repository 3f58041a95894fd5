#include "agentsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "agentsim/errors.hpp"

namespace agentsim {

WorkloadKind parse_workload_kind(std::string_view name) {
    if (name == "chain") return WorkloadKind::Chain;
    if (name == "funccall") return WorkloadKind::FuncCall;
    if (name == "tree") return WorkloadKind::Tree;
    if (name == "mixed") return WorkloadKind::Mixed;
    throw ConfigError("unknown workload kind '" + std::string(name) + "'");
}

std::string_view to_string(WorkloadKind k) {
    switch (k) {
    case WorkloadKind::Chain: return "chain";
    case WorkloadKind::FuncCall: return "funccall";
    case WorkloadKind::Tree: return "tree";
    case WorkloadKind::Mixed: return "mixed";
    }
    return "?";
}

namespace {

void check_range(const TokenRange& r, const char* what) {
    if (r.lo < 1 || r.hi < r.lo) {
        throw ConfigError(std::string("invalid token range for ") + what);
    }
}

// std distributions are implementation-defined; these are not, so traces
// match across standard libraries.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          static_cast<std::uint32_t>(salt)};
        eng_.seed(seq);
    }
    // [0, 1)
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    Tokens uniform(const TokenRange& r) {
        const auto span = static_cast<std::uint64_t>(r.hi - r.lo + 1);
        return r.lo + static_cast<Tokens>(eng_() % span);
    }
    int uniform_int(int lo, int hi) { return static_cast<int>(uniform({lo, hi})); }
    double uniform_real(double lo, double hi) { return lo + (hi - lo) * unit(); }
    double exponential(double rate) { return -std::log1p(-unit()) / rate; }

private:
    std::mt19937_64 eng_;
};

constexpr std::uint64_t kShapeSalt = 1;
constexpr std::uint64_t kArrivalSalt = 2;

CallRecord make_call(std::int64_t id, Stream& s, const TokenRange& in, const TokenRange& out) {
    CallRecord c;
    c.call_id = id;
    c.input_len = s.uniform(in);
    c.output_len = s.uniform(out);
    return c;
}

std::vector<CallRecord> gen_chain(const GenConfig& cfg, Stream& s, std::int64_t first_id) {
    const double p = 1.0 / cfg.chain_mean_len;
    int len = 1;
    if (p < 1.0) {
        len += static_cast<int>(std::floor(std::log1p(-s.unit()) / std::log1p(-p)));
    }
    len = std::min(len, cfg.chain_max_len);
    std::vector<CallRecord> calls;
    for (int i = 0; i < len; ++i) {
        auto c = make_call(first_id + i, s, cfg.chain_input, cfg.chain_output);
        if (i > 0) c.parents = {first_id + i - 1};
        calls.push_back(std::move(c));
    }
    return calls;
}

std::vector<CallRecord> gen_funccall(const GenConfig& cfg, Stream& s, std::int64_t first_id) {
    const int len = s.uniform_int(cfg.funccall_min_len, cfg.funccall_max_len);
    std::vector<CallRecord> calls;
    for (int i = 0; i < len; ++i) {
        auto c = make_call(first_id + i, s, cfg.funccall_input, cfg.funccall_output);
        if (i > 0) {
            c.parents = {first_id + i - 1};
            c.reveal_delay = s.uniform_real(cfg.tool_delay_lo, cfg.tool_delay_hi);
        }
        calls.push_back(std::move(c));
    }
    return calls;
}

std::vector<CallRecord> gen_tree(const GenConfig& cfg, Stream& s, std::int64_t first_id) {
    std::vector<CallRecord> calls;
    calls.push_back(make_call(first_id, s, cfg.tree_input, cfg.tree_output));
    std::vector<std::int64_t> level{first_id};
    for (int depth = 1; depth <= cfg.tree_depth; ++depth) {
        std::vector<std::int64_t> next;
        for (auto parent : level) {
            for (int b = 0; b < cfg.tree_branching; ++b) {
                auto c = make_call(first_id + static_cast<std::int64_t>(calls.size()), s, cfg.tree_input,
                                   cfg.tree_output);
                c.parents = {parent};
                next.push_back(c.call_id);
                calls.push_back(std::move(c));
            }
        }
        level = std::move(next);
    }
    return calls;
}

}  // namespace

void validate_gen_config(const GenConfig& cfg) {
    if (cfg.n_workflows < 1) throw ConfigError("n_workflows must be >= 1");
    if (!(cfg.rate > 0.0)) throw ConfigError("rate must be > 0");
    if (!(cfg.chain_mean_len >= 1.0)) throw ConfigError("chain_mean_len must be >= 1");
    if (cfg.chain_max_len < 1) throw ConfigError("chain_max_len must be >= 1");
    if (cfg.funccall_min_len < 1 || cfg.funccall_max_len < cfg.funccall_min_len) {
        throw ConfigError("invalid funccall length range");
    }
    if (cfg.tree_branching < 1 || cfg.tree_depth < 0) throw ConfigError("invalid tree shape");
    if (cfg.tool_delay_lo < 0.0 || cfg.tool_delay_hi < cfg.tool_delay_lo) {
        throw ConfigError("invalid tool delay range");
    }
    check_range(cfg.chain_input, "chain_input");
    check_range(cfg.chain_output, "chain_output");
    check_range(cfg.funccall_input, "funccall_input");
    check_range(cfg.funccall_output, "funccall_output");
    check_range(cfg.tree_input, "tree_input");
    check_range(cfg.tree_output, "tree_output");
}

TraceRecords gen_trace(const GenConfig& cfg) {
    validate_gen_config(cfg);
    const auto n = static_cast<std::size_t>(cfg.n_workflows);
    TraceRecords out(n);

    Stream arrivals(cfg.seed, 0, kArrivalSalt);
    Seconds t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) t += arrivals.exponential(cfg.rate);
        out[i].workflow_id = static_cast<std::int64_t>(i);
        out[i].arrival = t;
    }

    for (std::size_t i = 0; i < n; ++i) {
        Stream s(cfg.seed, i, kShapeSalt);
        auto kind = cfg.kind;
        if (kind == WorkloadKind::Mixed) {
            static constexpr WorkloadKind order[] = {WorkloadKind::Chain, WorkloadKind::FuncCall, WorkloadKind::Tree};
            kind = order[i % 3];
        }
        const std::int64_t first = 0;
        switch (kind) {
        case WorkloadKind::Chain: out[i].calls = gen_chain(cfg, s, first); break;
        case WorkloadKind::FuncCall: out[i].calls = gen_funccall(cfg, s, first); break;
        default: out[i].calls = gen_tree(cfg, s, first); break;
        }
    }
    // Shapes are drawn with local ids; shift them into one global numbering.
    std::int64_t next = 0;
    for (auto& wf : out) {
        for (auto& c : wf.calls) {
            c.call_id += next;
            for (auto& p : c.parents) p += next;
        }
        next += static_cast<std::int64_t>(wf.calls.size());
    }
    return out;
}

namespace {

std::array<Tokens, 4> percentiles(std::vector<Tokens> v) {
    std::array<Tokens, 4> out{};
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    const auto at = [&](double q) {
        auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
        return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
    };
    out = {at(0.5), at(0.9), at(0.99), v.back()};
    return out;
}

}  // namespace

TraceSummary describe_trace(const Trace& trace) {
    TraceSummary s;
    s.workflows = trace.workflows.size();
    s.calls = trace.calls.size();
    std::vector<Tokens> in;
    std::vector<Tokens> out;
    for (const auto& c : trace.calls) {
        in.push_back(c.input_len);
        out.push_back(c.output_len);
    }
    for (const auto& wf : trace.workflows) {
        std::map<CallId, int> level;
        std::map<int, int> width;
        int depth = 0;
        for (auto c : wf.calls) {  // topological order
            int l = 1;
            for (auto p : trace.call(c).parents) l = std::max(l, level[p] + 1);
            level[c] = l;
            ++width[l];
            depth = std::max(depth, l);
        }
        int w = 0;
        for (const auto& [_, count] : width) w = std::max(w, count);
        ++s.depth_histogram[depth];
        ++s.width_histogram[w];
        s.max_depth = std::max(s.max_depth, depth);
        s.max_width = std::max(s.max_width, w);
    }
    s.input_pct = percentiles(std::move(in));
    s.output_pct = percentiles(std::move(out));
    if (!trace.workflows.empty()) {
        s.first_arrival = trace.workflows.front().arrival;
        s.last_arrival = trace.workflows.back().arrival;
    }
    return s;
}

}  // namespace agentsim
