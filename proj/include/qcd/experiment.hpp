#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcd/config.hpp"
#include "qcd/design.hpp"
#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/metrics.hpp"
#include "qcd/renewal.hpp"

namespace qcd::experiment {

// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
};

struct RunResult {
    std::vector<std::string> files;
    bool poisoned = false;  // any flagged row or estimate
};

// Parsed pieces shared by every subcommand.
struct CommonConfig {
    std::string name;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = ".";
    std::string hash;  // of the full config document
};

CommonConfig parse_common(const config::Cursor& root, const nlohmann::json& full,
                          const Overrides& overrides);

DistributionPair parse_pair(const config::Cursor& pair_cursor);
ChangePointSpec parse_change(const config::Cursor& change_cursor);
PolicySpec parse_policy(const config::Cursor& detector_cursor);

// Subcommand runners. Each consumes the whole config document so the embedded
// hash covers every knob that shaped the output.
RunResult cmd_simulate(const nlohmann::json& cfg, const Overrides& overrides);
RunResult cmd_tradeoff(const nlohmann::json& cfg, const Overrides& overrides);
RunResult cmd_table2(const nlohmann::json& cfg, const Overrides& overrides);
RunResult cmd_calibrate(const nlohmann::json& cfg, const Overrides& overrides);
RunResult cmd_cycle_stats(const nlohmann::json& cfg, const Overrides& overrides);

// MetricEstimate as the JSON record {metric, value, std_error, n_trials,
// ci95, censored_fraction, config_hash}.
nlohmann::json metric_record(const MetricEstimate& estimate, const std::string& metric,
                             const std::string& config_hash);

// CycleStats round trip so calibration sweeps can reuse a stored run.
nlohmann::json cycle_stats_to_json(const CycleStats& stats);
CycleStats cycle_stats_from_json(const nlohmann::json& j);

// Writes via a temp file and rename; returns the final path.
std::string write_atomic(const std::string& dir, const std::string& filename, const std::string& contents);

// 17-significant-digit and display-rounded number formatting used in CSVs.
std::string format_full(double v);
std::string format_display(double v);

}  // namespace qcd::experiment
