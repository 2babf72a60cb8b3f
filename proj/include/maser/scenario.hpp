#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "maser/mme.hpp"

namespace maser {

enum class Scenario { steady, diffuse, probe, shorttime, mcwf };

const char* scenario_name(Scenario s);

/// One fully validated run configuration. Missing keys fall back to the
/// canonical operating point (g_tau = 0.494, g/gamma = 12.3, r/gamma = 10,
/// nbar = 0.03) and per-scenario numerical defaults; every defaulted key is
/// recorded.
struct ScenarioConfig {
    MicromaserParams params;
    int n_max = 64;
    std::optional<double> alpha;      // absent: matched to the steady state
    double g_tau_p = 0.494;
    double t_end = 150.0;
    int n_samples = 300;
    std::optional<double> fit_start;  // absent: 1.5 / D_eigen
    std::uint64_t seed = 12345;
    int n_trajectories = 2000;
    double dt = 2e-3;
    int bands = 3;                    // k_max for diffuse runs; -1 = all
    int threads = 0;

    std::vector<std::string> defaulted_keys;

    FockCutoff cutoff() const { return FockCutoff{n_max, 1e-10}; }
};

/// Parses a flat "key = value" document ('#' comments). All violations are
/// aggregated into one ConfigError: unknown keys, duplicates (reported with
/// both line numbers), unparsable numbers and range violations.
ScenarioConfig validate_config(const std::string& text, Scenario scenario);

ScenarioConfig load_config_file(const std::filesystem::path& path, Scenario scenario);

struct ScenarioResult {
    std::map<std::string, std::string> summary;
    std::vector<std::filesystem::path> files;
};

/// Runs one scenario and writes series.csv / photon_stats.csv / summary.txt
/// under out_dir (created if needed). Every output is computed before the
/// first file is opened, so a failing run leaves no files behind.
ScenarioResult run_scenario(Scenario scenario, const ScenarioConfig& config,
                            const std::filesystem::path& out_dir);

/// Deterministic short formatting used for all CSV/summary values.
std::string format_value(double x);

}  // namespace maser
