#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>

#include "fpension/model.hpp"

namespace fpension {

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double start, double end, int n_steps);

    /// Grid on [start, end] whose step is `dt`; (end - start) / dt must be an
    /// integer up to rounding.
    static TimeGrid with_step(double start, double end, double dt);

    double dt() const { return (t1 - t0) / steps; }

    /// Time of grid point k, 0 <= k <= steps.
    double time(int k) const { return t0 + (t1 - t0) * static_cast<double>(k) / steps; }

    /// Index of the grid point at time t; throws DomainError when t is not on the grid.
    int index_of(double t) const;

    /// Throws DomainError when a breakpoint inside (t0, t1) falls strictly
    /// between two grid points.
    void require_aligned(std::span<const double> breakpoints) const;
};

using NoiseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NoisePath {
    NoiseMatrix dB1;  // steps x n
    NoiseMatrix dB2;  // steps x m
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;

    int steps() const { return static_cast<int>(dB1.rows()); }
    Vec dB1_at(int k) const { return dB1.row(k).transpose(); }
    Vec dB2_at(int k) const { return dB2.row(k).transpose(); }
};

/// Per-path generator seed: splitmix64(seed XOR splitmix64(path_index)).
/// Path k of a run only depends on (seed, k), whatever the worker layout.
std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path_index);

/// I.i.d. Normal(0, dt) increments, step-major: at each step the n hedgeable
/// draws precede the m non-hedgeable ones.
NoisePath generate_noise(std::uint64_t seed, std::uint64_t path_index, const TimeGrid& grid, int n, int m);

/// Sums each block of `factor` consecutive increments (same Brownian path on
/// a grid `factor` times coarser).
NoisePath coarsen(const NoisePath& fine, int factor);

/// Deterministic path built from cumulative Brownian levels sampled on the
/// grid points (levels has steps+1 rows, first row the starting level).
NoisePath noise_from_levels(const NoiseMatrix& levels1, const NoiseMatrix& levels2);

/// Replay file: header `step,dB1_1..dB1_n,dB2_1..dB2_m`, one row per step.
void write_noise_csv(const std::filesystem::path& path, const NoisePath& noise);

/// Reads a replay file and checks it has exactly `steps` rows and n + m
/// increment columns; throws ValidationError("replay", ...) otherwise.
NoisePath read_noise_csv(const std::filesystem::path& path, int steps, int n, int m);

}  // namespace fpension
