#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "agentsim/cluster.hpp"
#include "agentsim/core.hpp"
#include "agentsim/engine.hpp"
#include "agentsim/metrics.hpp"

namespace agentsim {

// JSON lines. A record with `arrival_time_s` and no `call_id` is a workflow
// header; every other record is a call. Throws TraceError with the line number.
TraceRecords read_trace_records(std::istream& in);
TraceRecords read_trace_records(const std::filesystem::path& path);
void write_trace_records(std::ostream& out, const TraceRecords& records);
void write_trace_records(const std::filesystem::path& path, const TraceRecords& records);

// Throws ConfigError.
ClusterSpec parse_cluster(std::string_view json_text);
ClusterSpec read_cluster(const std::filesystem::path& path);
std::string cluster_to_json(const ClusterSpec& cluster);

// Shortest round-trip decimal form; reading it back gives the same double.
std::string format_double(double v);

void write_calls_csv(std::ostream& out, const Trace& trace, const SimResult& r);
void write_workflows_csv(std::ostream& out, const SimResult& r);
void write_planner_csv(std::ostream& out, const SimResult& r);
void write_curve_csv(std::ostream& out, std::span<const AttainmentPoint> curve);
void write_horizons_csv(std::ostream& out, const SimResult& r);

struct SummaryRow {
    std::string policy;
    std::string trace;
    ReqPair req;
    OverheadRecord overhead;
};

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

// Writes to a sibling temp file and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace agentsim
