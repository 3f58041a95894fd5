#include "agentsim/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "agentsim/errors.hpp"
#include "json.hpp"

namespace agentsim {

using nlohmann::json;

namespace {

std::string read_all(const std::filesystem::path& path, bool trace) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        const std::string msg = "cannot open " + path.string();
        if (trace) throw TraceError(msg);
        throw ConfigError(msg);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class T>
T get_field(const json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) {
        throw TraceError("line " + std::to_string(line) + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw TraceError("line " + std::to_string(line) + ": bad value for '" + key + "'");
    }
}

}  // namespace

TraceRecords read_trace_records(std::istream& in) {
    std::map<std::int64_t, std::size_t> index;
    TraceRecords out;
    auto workflow = [&](std::int64_t id) -> WorkflowRecord& {
        auto [it, inserted] = index.emplace(id, out.size());
        if (inserted) {
            out.push_back(WorkflowRecord{id, std::nullopt, {}});
        }
        return out[it->second];
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw TraceError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) {
            throw TraceError("line " + std::to_string(lineno) + ": expected an object");
        }
        const auto wid = get_field<std::int64_t>(j, "workflow_id", lineno);
        auto& wf = workflow(wid);
        if (!j.contains("call_id")) {
            if (wf.arrival) {
                throw TraceError("line " + std::to_string(lineno) + ": duplicate header for workflow " +
                                 std::to_string(wid));
            }
            wf.arrival = get_field<double>(j, "arrival_time_s", lineno);
            continue;
        }
        CallRecord c;
        c.call_id = get_field<std::int64_t>(j, "call_id", lineno);
        if (j.contains("parents")) c.parents = get_field<std::vector<std::int64_t>>(j, "parents", lineno);
        c.input_len = get_field<Tokens>(j, "input_len", lineno);
        c.output_len = get_field<Tokens>(j, "output_len", lineno);
        if (j.contains("reveal_delay_s")) c.reveal_delay = get_field<double>(j, "reveal_delay_s", lineno);
        wf.calls.push_back(std::move(c));
    }
    return out;
}

TraceRecords read_trace_records(const std::filesystem::path& path) {
    std::istringstream in(read_all(path, true));
    return read_trace_records(in);
}

void write_trace_records(std::ostream& out, const TraceRecords& records) {
    for (const auto& wf : records) {
        out << "{\"workflow_id\":" << wf.workflow_id << ",\"arrival_time_s\":" << format_double(wf.arrival.value_or(0.0))
            << "}\n";
        for (const auto& c : wf.calls) {
            out << "{\"workflow_id\":" << wf.workflow_id << ",\"call_id\":" << c.call_id << ",\"parents\":[";
            for (std::size_t i = 0; i < c.parents.size(); ++i) {
                out << (i ? "," : "") << c.parents[i];
            }
            out << "],\"input_len\":" << c.input_len << ",\"output_len\":" << c.output_len;
            if (c.reveal_delay != 0.0) {
                out << ",\"reveal_delay_s\":" << format_double(c.reveal_delay);
            }
            out << "}\n";
        }
    }
}

void write_trace_records(const std::filesystem::path& path, const TraceRecords& records) {
    std::ostringstream ss;
    write_trace_records(ss, records);
    write_file_atomic(path, ss.str());
}

ClusterSpec parse_cluster(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("cluster: ") + e.what());
    }
    ClusterSpec c;
    try {
        c.name = j.value("name", std::string{});
        for (const auto& inst : j.at("instances")) {
            InstanceSpec s;
            s.id = inst.at("id").get<InstanceId>();
            const auto pool = inst.at("pool").get<std::string>();
            if (pool == "prefill") {
                s.pool = Pool::Prefill;
            } else if (pool == "decode") {
                s.pool = Pool::Decode;
            } else {
                throw ConfigError("instance " + std::to_string(s.id) + ": unknown pool '" + pool + "'");
            }
            s.gpu_class = inst.at("gpu_class").get<std::string>();
            s.kv_capacity = inst.value("kv_capacity_tokens", Tokens{0});
            c.instances.push_back(std::move(s));
        }
        for (const auto& b : j.at("bandwidth")) {
            c.bandwidth[{b.at("src").get<std::string>(), b.at("dst").get<std::string>()}] =
                b.at("bytes_per_s").get<double>();
        }
        c.transfer_setup = j.value("transfer_setup_s", 0.0);
        const auto& m = j.at("model");
        const auto mode = m.value("mode", std::string("table"));
        if (mode == "table") {
            c.model.mode = LatencyMode::Table;
        } else if (mode == "roofline") {
            c.model.mode = LatencyMode::Roofline;
        } else {
            throw ConfigError("unknown latency mode '" + mode + "'");
        }
        const auto& p = m.at("profile");
        c.model.profile.name = p.value("name", std::string{});
        c.model.profile.param_bytes = p.value("param_bytes", 0.0);
        c.model.profile.kv_bytes_per_token = p.at("kv_bytes_per_token").get<double>();
        c.model.profile.flops_per_token = p.value("flops_per_token", 0.0);
        c.model.profile.prefill_bytes_per_token = p.value("prefill_bytes_per_token", 0.0);
        c.model.profile.decode_bytes_per_token = p.value("decode_bytes_per_token", 0.0);
        for (const auto& [cls, v] : m.at("classes").items()) {
            ClassCoefficients k;
            k.prefill_s_per_token = v.value("prefill_s_per_token", 0.0);
            k.decode_s_per_token = v.value("decode_s_per_token", 0.0);
            k.peak_flops = v.value("peak_flops", 0.0);
            k.mem_bandwidth = v.value("mem_bandwidth", 0.0);
            c.model.classes[cls] = k;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("cluster: ") + e.what());
    }
    validate_cluster(c);
    return c;
}

ClusterSpec read_cluster(const std::filesystem::path& path) { return parse_cluster(read_all(path, false)); }

std::string cluster_to_json(const ClusterSpec& c) {
    json j;
    j["name"] = c.name;
    j["instances"] = json::array();
    for (const auto& s : c.instances) {
        json inst{{"id", s.id}, {"pool", s.pool == Pool::Prefill ? "prefill" : "decode"}, {"gpu_class", s.gpu_class}};
        if (s.pool == Pool::Decode) inst["kv_capacity_tokens"] = s.kv_capacity;
        j["instances"].push_back(inst);
    }
    j["bandwidth"] = json::array();
    for (const auto& [k, v] : c.bandwidth) {
        j["bandwidth"].push_back({{"src", k.first}, {"dst", k.second}, {"bytes_per_s", v}});
    }
    j["transfer_setup_s"] = c.transfer_setup;
    const auto& p = c.model.profile;
    j["model"] = {{"mode", c.model.mode == LatencyMode::Table ? "table" : "roofline"},
                  {"profile",
                   {{"name", p.name},
                    {"param_bytes", p.param_bytes},
                    {"kv_bytes_per_token", p.kv_bytes_per_token},
                    {"flops_per_token", p.flops_per_token},
                    {"prefill_bytes_per_token", p.prefill_bytes_per_token},
                    {"decode_bytes_per_token", p.decode_bytes_per_token}}}};
    j["model"]["classes"] = json::object();
    for (const auto& [cls, k] : c.model.classes) {
        j["model"]["classes"][cls] = {{"prefill_s_per_token", k.prefill_s_per_token},
                                      {"decode_s_per_token", k.decode_s_per_token},
                                      {"peak_flops", k.peak_flops},
                                      {"mem_bandwidth", k.mem_bandwidth}};
    }
    return j.dump(2) + "\n";
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

void header(std::ostream& out, std::string_view name) { out << "# agentsim " << name << " v1\n"; }

std::string opt_id(const std::optional<InstanceId>& id) { return id ? std::to_string(*id) : ""; }

}  // namespace

void write_calls_csv(std::ostream& out, const Trace& trace, const SimResult& r) {
    header(out, "calls");
    out << "workflow_id,call_id,source_call_id,prefill_instance,decode_instance,revealed_s,prefill_start_s,"
           "transfer_start_s,decode_ready_s,decode_start_s,complete_s,predicted_output_len\n";
    for (const auto& n : r.calls) {
        out << n.workflow << ',' << n.id << ',' << trace.call(n.id).source_id << ',' << opt_id(n.prefill_instance)
            << ',' << opt_id(n.decode_instance);
        for (auto s : {CallState::WaitingPrefill, CallState::Prefill, CallState::Transfer, CallState::WaitingDecode,
                       CallState::Decode, CallState::Complete}) {
            out << ',' << format_double(n.entered_at(s));
        }
        out << ',' << n.predicted_output_len << '\n';
    }
}

void write_workflows_csv(std::ostream& out, const SimResult& r) {
    header(out, "workflows");
    out << "workflow_id,arrival_s,completion_s,horizon_s,ratio\n";
    for (const auto& w : r.workflows) {
        out << w.id << ',' << format_double(w.arrival) << ',' << format_double(w.completion) << ','
            << format_double(w.horizon) << ',' << format_double(w.ratio()) << '\n';
    }
}

void write_planner_csv(std::ostream& out, const SimResult& r) {
    header(out, "planner");
    out << "plan_id,time_s,stage,queue_len,wall_us,sim_latency_s,applied,stale\n";
    for (const auto& p : r.planner) {
        out << p.plan_id << ',' << format_double(p.time) << ',' << to_string(p.stage) << ',' << p.queue_len << ','
            << format_double(p.wall_us) << ',' << format_double(p.sim_latency) << ',' << p.applied << ','
            << p.stale << '\n';
    }
}

void write_curve_csv(std::ostream& out, std::span<const AttainmentPoint> curve) {
    header(out, "curve");
    out << "alpha,fraction\n";
    for (const auto& p : curve) {
        out << format_double(p.alpha) << ',' << format_double(p.fraction) << '\n';
    }
}

void write_horizons_csv(std::ostream& out, const SimResult& r) {
    header(out, "horizons");
    out << "workflow_id,time_s,horizon_s\n";
    for (const auto& h : r.horizons) {
        out << h.workflow << ',' << format_double(h.time) << ',' << format_double(h.horizon) << '\n';
    }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
    header(out, "summary");
    out << "policy,trace,req95,req99,invocations,mean_ms_per_inv,total_overhead_s\n";
    for (const auto& row : rows) {
        out << row.policy << ',' << row.trace << ',' << format_double(row.req.req95) << ','
            << format_double(row.req.req99) << ',' << row.overhead.invocations << ','
            << format_double(row.overhead.mean_ms) << ',' << format_double(row.overhead.total_s) << '\n';
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw ConfigError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace agentsim
