#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agentsim/engine.hpp"
#include "agentsim/workload.hpp"

namespace agentsim {

struct RunConfig {
    std::filesystem::path trace;
    std::filesystem::path cluster;
    std::string policy = "hexagent";
    std::vector<std::string> policies;  // compare only
    double est_error = 0.0;
    double pred_error = 0.0;
    Seconds planning_latency = 0.010;
    Seconds bootstrap_latency = 0.0;
    std::filesystem::path out = "out";
    std::vector<double> alphas;  // empty means the default grid
    int greedy_threshold = 64;
    double llf_kappa = 1.0;
    bool wallclock = true;
    bool horizons = false;
    int jobs = 1;
};

// 1.0, 1.1, ..., 10.0
std::vector<double> default_alpha_grid();

// Overlays keys present in a JSON run config onto `cfg`. Throws ConfigError.
void apply_run_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Throws ConfigError naming the first bad field.
void validate_run_config(const RunConfig& cfg);

SimConfig sim_config(const RunConfig& cfg);
PolicyConfig policy_config(const RunConfig& cfg, std::string_view policy);

// Each returns the process exit code; diagnostics go to `err`.
int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_gen(const GenConfig& cfg, const std::filesystem::path& path, std::ostream& out, std::ostream& err);
int cmd_describe(const std::filesystem::path& trace, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace agentsim
