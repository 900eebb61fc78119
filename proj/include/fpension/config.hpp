#pragma once

// Run configuration: a JSON document (comments allowed) with the sections
// market, salary, plan, preference, simulation and optional experiment
// sections, plus dotted key=value overrides applied on top.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpension/model.hpp"

namespace fpension {

struct SimulationConfig {
    int paths = 10000;
    std::uint64_t seed = 20240517;
    int steps_per_year = 252;
    std::vector<double> checkpoints;  // empty: experiment default
    int workers = 0;                  // 0: hardware concurrency
};

/// Settings of the regime-switch studies.
struct RegimeConfig {
    double horizon = 20.0;  // retirement time T
    double t0 = 10.0;       // switch time
    double muY_tilde = 0.07;
};

struct ShowcaseConfig {
    std::vector<double> betas{-0.25, 0.25};
    double horizon = 10.0;
    std::vector<double> times{1.0, 5.0, 10.0};  // utility-grid snapshots
    double x_min = 0.0;
    double x_max = 10.0;
    int x_points = 101;
    double x_probe = 5.0;
    double ramp = 3.0;  // end level of the trending stand-in paths
    std::map<std::string, std::filesystem::path> replay;  // scenario -> replay CSV
};

struct MartingaleConfig {
    std::vector<std::string> families{"power", "exp"};
    std::vector<double> perturbations{0.5, 1.5};
};

struct SpdeConfig {
    int samples = 10000;
};

struct ConsistencyConfig {
    int paths = 2000;
    std::vector<int> steps_per_year{8, 16, 32, 64};
    double horizon = 5.0;
};

struct RunConfig {
    ModelParams params;
    PreferenceSpec pref;
    SimulationConfig sim;
    RegimeConfig regime;
    ShowcaseConfig showcase;
    MartingaleConfig martingale;
    SpdeConfig spde;
    ConsistencyConfig consistency;
    std::filesystem::path output_dir = "out";
    std::string experiment;
};

/// Built-in parameter sets: name -> JSON text.
const std::map<std::string, std::string, std::less<>>& presets();

/// Parses JSON text (comments allowed), applies the overrides and validates.
/// Throws ParseError for malformed text or values of the wrong JSON type and
/// ValidationError for unknown keys or invalid values.
RunConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides = {});

/// As parse_config_text, reading the document from a file (IoError if unreadable).
RunConfig parse_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

/// Loads a named preset, then applies the overrides.
RunConfig load_preset(std::string_view name, const std::vector<std::string>& overrides = {});

/// Canonical JSON snapshot of the parameters (stored in reports).
std::string config_snapshot(const RunConfig& cfg);

}  // namespace fpension
