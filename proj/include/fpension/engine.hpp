#pragma once

// Path simulation of the salary, fund, ratio and preference states under any
// set of strategies driven by one shared Brownian path.
//
// Scheme per state:
//   Y                          exact geometric step
//   X^{pihat,0}, W^{pitilde,0} exact linear part; the step's contributions,
//                              weighted to keep the conditional mean exact,
//                              are added before the multiplicative step
//   Gamma, Gamma tilde         exact geometric step
//   V                          Euler (exact for piecewise-constant coefficients)
//   X under power rules        log step of the cushion X - X^{pihat,0}
//   X under exponential rules  arithmetic step of (X - X^{pihat,0}) / Gamma
//   X under any other rule     Euler-Maruyama on the ratio equation
// Wealth-family lanes integrate W the same way and report X = W / Y; ratio
// lanes report W = X Y.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpension/model.hpp"
#include "fpension/noise.hpp"
#include "fpension/strategies.hpp"

namespace fpension {

struct Lane {
    std::string id;
    ModelParams params;
    StrategyPolicy policy;
};

/// Recorded series of one lane. Z and Gamma are in the units of the lane's
/// preference family: ratio floor and Gamma for ratio families, wealth floor
/// and Gamma tilde for wealth families, zero for lanes without a family.
struct LanePath {
    std::string id;
    std::vector<double> Y, W, X, Z, Gamma, V;
    std::vector<Vec> pi;
};

struct PathBundle {
    TimeGrid grid;
    std::uint64_t path_index = 0;
    std::vector<int> indices;   // recorded grid indices
    std::vector<double> times;  // grid times of the recorded indices
    std::vector<LanePath> lanes;

    const LanePath& lane(std::string_view id) const;
};

/// Precomputes every lane's coefficient tables once; run() is const and may
/// be called concurrently from several threads.
class JointSimulator {
public:
    /// `record` lists the grid indices to keep (all grid points when empty).
    JointSimulator(std::vector<Lane> lanes, TimeGrid grid, std::vector<int> record = {});
    ~JointSimulator();
    JointSimulator(JointSimulator&&) noexcept;
    JointSimulator& operator=(JointSimulator&&) noexcept;

    PathBundle run(const NoisePath& noise) const;

    const TimeGrid& grid() const;
    const std::vector<Lane>& lanes() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Grid indices of the given times; throws DomainError for off-grid times.
std::vector<int> checkpoint_indices(const TimeGrid& grid, std::span<const double> times);

PathBundle simulate_ratio_path(const ModelParams& params, const StrategyPolicy& policy, const NoisePath& noise,
                               const TimeGrid& grid);

PathBundle simulate_joint(const std::vector<Lane>& lanes, const NoisePath& noise, const TimeGrid& grid);
PathBundle simulate_joint(const ModelParams& params, const std::vector<StrategyPolicy>& policies,
                          const NoisePath& noise, const TimeGrid& grid);

/// Affine baseline ratio dZ = p dt + Z(alpha dt + beta^T dB1 - sigmaY2^T dB2)
/// by variation of constants. With `contributions` false the p term is
/// dropped, which gives the Gamma process of the exponential family.
std::vector<double> simulate_baseline_ratio(const ModelParams& params, const Schedule<Vec>& beta,
                                            const NoisePath& noise, const TimeGrid& grid, double z0,
                                            bool contributions = true);

/// Euler-Maruyama on the fund value W with the exact salary, for comparing
/// W/Y against a directly integrated ratio. Floor and Gamma based rules are
/// not supported here.
struct DirectWealthPath {
    std::vector<double> Y, W, X;
};
DirectWealthPath simulate_wealth_direct(const ModelParams& params, const StrategyPolicy& policy,
                                        const NoisePath& noise, const TimeGrid& grid);

/// Columns t,Y,W,X,Z,Gamma,V,pi_1..pi_n for one lane of a bundle.
void write_trajectory_csv(const std::filesystem::path& path, const PathBundle& bundle, std::string_view lane_id);

}  // namespace fpension
