#pragma once

// Helpers shared by the experiment and verification drivers.

#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fpension/engine.hpp"
#include "fpension/io.hpp"
#include "fpension/stats.hpp"

namespace fpension::detail {

inline TimeGrid grid_for(double horizon, int steps_per_year) {
    const double steps = horizon * steps_per_year;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps) || steps < 1.0) {
        throw ValidationError("simulation.steps_per_year",
                              "horizon " + format_double(horizon) + " is not a whole number of steps");
    }
    return TimeGrid(0.0, horizon, static_cast<int>(std::round(steps)));
}

/// Simulates paths 0..paths-1 and hands each bundle to `collect(i, bundle)`;
/// collect must only write to slots owned by path i.
inline void run_paths(const JointSimulator& sim, std::uint64_t seed, int paths, int workers,
                      const std::function<void(std::size_t, const PathBundle&)>& collect) {
    const auto& lanes = sim.lanes();
    const int n = lanes.front().params.n;
    const int m = lanes.front().params.m;
    parallel_for(static_cast<std::size_t>(paths), workers, [&](std::size_t i) {
        const NoisePath noise = generate_noise(seed, i, sim.grid(), n, m);
        collect(i, sim.run(noise));
    });
}

inline std::string time_tag(double t) { return format_double(t); }

inline void write_samples(const std::filesystem::path& file, std::span<const double> samples) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (double v : empirical_cdf(samples)) rows.push_back({v});
    write_csv(file, {"sample_value"}, rows);
}

inline int index_in(const PathBundle& b, int grid_index) {
    for (std::size_t r = 0; r < b.indices.size(); ++r) {
        if (b.indices[r] == grid_index) return static_cast<int>(r);
    }
    throw DomainError("grid index " + std::to_string(grid_index) + " was not recorded");
}

}  // namespace fpension::detail
