#include "fpension/noise.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fpension/io.hpp"

namespace fpension {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

TimeGrid::TimeGrid(double start, double end, int n_steps) : t0(start), t1(end), steps(n_steps) {
    if (!(end > start)) {
        throw DomainError("time grid needs t1 > t0");
    }
    if (n_steps < 1) {
        throw DomainError("time grid needs at least one step");
    }
}

TimeGrid TimeGrid::with_step(double start, double end, double dt) {
    if (!(dt > 0.0)) {
        throw DomainError("time step must be positive");
    }
    const double ratio = (end - start) / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio)) {
        throw DomainError("horizon is not a whole number of steps");
    }
    return TimeGrid(start, end, static_cast<int>(rounded));
}

int TimeGrid::index_of(double t) const {
    const double pos = (t - t0) / dt();
    const double k = std::round(pos);
    if (std::abs(pos - k) > 1e-6 || k < 0 || k > steps) {
        throw DomainError("time " + format_double(t) + " is not a grid point");
    }
    return static_cast<int>(k);
}

void TimeGrid::require_aligned(std::span<const double> breakpoints) const {
    for (double b : breakpoints) {
        if (b <= t0 + kBreakpointTolerance || b >= t1 - kBreakpointTolerance) {
            continue;
        }
        const double pos = (b - t0) / dt();
        if (std::abs(pos - std::round(pos)) > 1e-6) {
            throw DomainError("regime switch at t = " + format_double(b) + " falls between grid points");
        }
    }
}

std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path_index) {
    return splitmix64(seed ^ splitmix64(path_index));
}

NoisePath generate_noise(std::uint64_t seed, std::uint64_t path_index, const TimeGrid& grid, int n, int m) {
    if (grid.steps < 1) {
        throw DomainError("noise needs at least one step");
    }
    NoisePath noise;
    noise.seed = seed;
    noise.path_index = path_index;
    noise.dB1.resize(grid.steps, n);
    noise.dB2.resize(grid.steps, m);
    std::mt19937_64 engine(path_stream_seed(seed, path_index));
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt()));
    for (int k = 0; k < grid.steps; ++k) {
        for (int i = 0; i < n; ++i) noise.dB1(k, i) = normal(engine);
        for (int j = 0; j < m; ++j) noise.dB2(k, j) = normal(engine);
    }
    return noise;
}

NoisePath coarsen(const NoisePath& fine, int factor) {
    if (factor < 1 || fine.steps() % factor != 0) {
        throw DomainError("coarsening factor must divide the number of steps");
    }
    NoisePath out;
    out.seed = fine.seed;
    out.path_index = fine.path_index;
    const int steps = fine.steps() / factor;
    out.dB1 = NoiseMatrix::Zero(steps, fine.dB1.cols());
    out.dB2 = NoiseMatrix::Zero(steps, fine.dB2.cols());
    for (int k = 0; k < fine.steps(); ++k) {
        out.dB1.row(k / factor) += fine.dB1.row(k);
        out.dB2.row(k / factor) += fine.dB2.row(k);
    }
    return out;
}

NoisePath noise_from_levels(const NoiseMatrix& levels1, const NoiseMatrix& levels2) {
    if (levels1.rows() != levels2.rows() || levels1.rows() < 2) {
        throw DomainError("level paths need the same number (>= 2) of grid points");
    }
    NoisePath out;
    const auto steps = levels1.rows() - 1;
    out.dB1 = levels1.bottomRows(steps) - levels1.topRows(steps);
    out.dB2 = levels2.bottomRows(steps) - levels2.topRows(steps);
    return out;
}

void write_noise_csv(const std::filesystem::path& path, const NoisePath& noise) {
    std::vector<std::string> header{"step"};
    for (int i = 0; i < noise.dB1.cols(); ++i) header.push_back("dB1_" + std::to_string(i + 1));
    for (int j = 0; j < noise.dB2.cols(); ++j) header.push_back("dB2_" + std::to_string(j + 1));
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(noise.steps()));
    for (int k = 0; k < noise.steps(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (int i = 0; i < noise.dB1.cols(); ++i) row.push_back(noise.dB1(k, i));
        for (int j = 0; j < noise.dB2.cols(); ++j) row.push_back(noise.dB2(k, j));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

NoisePath read_noise_csv(const std::filesystem::path& path, int steps, int n, int m) {
    CsvTable table;
    try {
        table = read_csv(path);
    } catch (const ParseError& e) {
        throw ValidationError("replay", path.string() + ": " + e.what());
    }
    const auto cols = static_cast<std::size_t>(1 + n + m);
    if (table.header.size() != cols) {
        throw ValidationError("replay", path.string() + ": expected " + std::to_string(cols) + " columns, found " +
                                            std::to_string(table.header.size()));
    }
    if (table.rows.size() != static_cast<std::size_t>(steps)) {
        throw ValidationError("replay", path.string() + ": expected " + std::to_string(steps) + " steps, found " +
                                            std::to_string(table.rows.size()));
    }
    NoisePath noise;
    noise.dB1.resize(steps, n);
    noise.dB2.resize(steps, m);
    for (int k = 0; k < steps; ++k) {
        const auto& row = table.rows[static_cast<std::size_t>(k)];
        if (row.size() != cols) {
            throw ValidationError("replay", path.string() + ": ragged row " + std::to_string(k));
        }
        for (int i = 0; i < n; ++i) noise.dB1(k, i) = row[static_cast<std::size_t>(1 + i)];
        for (int j = 0; j < m; ++j) noise.dB2(k, j) = row[static_cast<std::size_t>(1 + n + j)];
    }
    return noise;
}

}  // namespace fpension
