#pragma once

// Scripted Monte-Carlo studies and verification suites. Each returns a report
// with summaries and pass/fail verdicts and, when an output directory is
// given, writes its CSV artifacts there.

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "fpension/config.hpp"
#include "fpension/noise.hpp"

namespace fpension {

struct Verdict {
    std::string name;
    bool pass = false;
    double value = 0.0;
    std::string rule;  // human-readable pass condition
};

struct ExperimentReport {
    std::string id;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<Verdict> verdicts;

    bool passed() const;
    nlohmann::json to_json() const;
    void add(std::string name, bool pass, double value, std::string rule);
};

struct ExperimentContext {
    std::filesystem::path output_dir;  // empty: no files
    int workers = 1;
};

/// Ids accepted by run_experiment / run_verification.
const std::vector<std::string>& experiment_ids();
const std::vector<std::string>& verification_ids();

ExperimentReport backward_pitfall(const RunConfig& cfg, const ExperimentContext& ctx);
ExperimentReport forward_revisit(const RunConfig& cfg, const ExperimentContext& ctx);
ExperimentReport power_showcase(const RunConfig& cfg, const ExperimentContext& ctx);
ExperimentReport martingale_suite(const RunConfig& cfg, const ExperimentContext& ctx);
ExperimentReport spde_suite(const RunConfig& cfg, const ExperimentContext& ctx);
/// Integrator checks: strong order on a geometric special case and the
/// agreement of W/Y with the directly integrated ratio.
ExperimentReport integrator_suite(const RunConfig& cfg, const ExperimentContext& ctx);

ExperimentReport run_experiment(const std::string& id, const RunConfig& cfg, const ExperimentContext& ctx);
ExperimentReport run_verification(const std::string& id, const RunConfig& cfg, const ExperimentContext& ctx);

/// Deterministic stand-in Brownian paths of the showcase scenarios on
/// [0, horizon] (omega1 .. omega4), ending at +-ramp for trending legs.
NoisePath showcase_scenario(const std::string& scenario, const TimeGrid& grid, double ramp);

/// Writes report.json (pretty printed, stable key order).
void write_report(const std::filesystem::path& dir, const ExperimentReport& report);

}  // namespace fpension
