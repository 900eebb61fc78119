#include "fpension/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpension/engine.hpp"
#include "fpension/io.hpp"
#include "fpension/preferences.hpp"
#include "fpension/stats.hpp"
#include "mc_common.hpp"

namespace fpension {

using nlohmann::json;
using detail::grid_for;
using detail::index_in;
using detail::run_paths;
using detail::time_tag;
using detail::write_samples;

bool ExperimentReport::passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

void ExperimentReport::add(std::string name, bool pass, double value, std::string rule) {
    verdicts.push_back(Verdict{std::move(name), pass, value, std::move(rule)});
}

json ExperimentReport::to_json() const {
    json v = json::array();
    for (const auto& d : verdicts) {
        v.push_back({{"name", d.name}, {"pass", d.pass}, {"value", d.value}, {"rule", d.rule}});
    }
    return {{"experiment", id}, {"passed", passed()}, {"summary", summary}, {"verdicts", v}};
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report) {
    write_text_file(dir / "report.json", report.to_json().dump(2) + "\n");
}

const std::vector<std::string>& experiment_ids() {
    static const std::vector<std::string> ids{"backward-pitfall", "forward-revisit", "power-showcase"};
    return ids;
}

const std::vector<std::string>& verification_ids() {
    static const std::vector<std::string> ids{"martingale", "spde", "integrator"};
    return ids;
}

namespace {

json base_summary(const RunConfig& cfg) {
    return {{"parameters", json::parse(config_snapshot(cfg))},
            {"seed", cfg.sim.seed},
            {"paths", cfg.sim.paths},
            {"steps_per_year", cfg.sim.steps_per_year}};
}

std::vector<double> checkpoints_or(const RunConfig& cfg, std::vector<double> fallback) {
    auto cps = cfg.sim.checkpoints.empty() ? std::move(fallback) : cfg.sim.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    return cps;
}

ModelParams switched_params(const ModelParams& base, const RegimeConfig& reg) {
    ModelParams p = base;
    p.muY = base.muY.switched_at(reg.t0, reg.muY_tilde);
    return p;
}

// True when the switch leaves the salary drift schedule untouched.
bool switch_is_trivial(const ModelParams& base, const RegimeConfig& reg) {
    const auto sw = base.muY.switched_at(reg.t0, reg.muY_tilde);
    return std::ranges::equal(sw.breakpoints(), base.muY.breakpoints()) &&
           std::ranges::equal(sw.values(), base.muY.values());
}

// Reference probabilities of the backward study and their tolerance.
struct Reference {
    double t;
    double p_positive;
};
constexpr Reference kBackwardReference[] = {{5.0, 0.9822}, {9.0, 0.9745}};
constexpr double kBackwardTolerance = 0.01;

}  // namespace

// ---------------------------------------------------------------------------

ExperimentReport backward_pitfall(const RunConfig& cfg, const ExperimentContext& ctx) {
    ExperimentReport rep;
    rep.id = "backward-pitfall";
    rep.summary = base_summary(cfg);
    const ModelParams& base = cfg.params;
    if (base.n != 1) throw ValidationError("market.n", "the backward study needs a single risky asset");
    const auto cps = checkpoints_or(cfg, {5.0, 9.0});
    const double t_end = cps.back();
    if (t_end > cfg.regime.horizon) throw ValidationError("simulation.checkpoints", "checkpoint after the horizon");

    const TimeGrid grid = grid_for(t_end, cfg.sim.steps_per_year);
    const BackwardPlan plan{cfg.regime.horizon, cfg.pref.gamma};
    std::vector<Lane> lanes{
        {"back", base, make_backward_policy(plan, PolicyKind::Backward, "back")},
        {"back_star", switched_params(base, cfg.regime), make_backward_policy(plan, PolicyKind::BackwardOracle, "back_star")},
    };
    const auto idx = checkpoint_indices(grid, cps);
    const JointSimulator sim(lanes, grid, idx);

    const auto paths = static_cast<std::size_t>(cfg.sim.paths);
    std::vector<std::vector<double>> diff(cps.size(), std::vector<double>(paths));
    run_paths(sim, cfg.sim.seed, cfg.sim.paths, ctx.workers, [&](std::size_t i, const PathBundle& b) {
        const auto& plain = b.lane("back");
        const auto& star = b.lane("back_star");
        for (std::size_t c = 0; c < cps.size(); ++c) {
            const auto r = static_cast<std::size_t>(index_in(b, idx[c]));
            diff[c][i] = star.pi[r](0) - plain.pi[r](0);
        }
    });

    const bool trivial = switch_is_trivial(base, cfg.regime);
    json per_time = json::object();
    double max_abs = 0.0;
    for (std::size_t c = 0; c < cps.size(); ++c) {
        const double p_pos = fraction_above(diff[c], 0.0);
        const Summary s = summarize(diff[c]);
        for (double d : diff[c]) max_abs = std::max(max_abs, std::abs(d));
        per_time[time_tag(cps[c])] = {{"p_positive", p_pos}, {"mean", s.mean}, {"stderr", s.stderr_}};
        if (!ctx.output_dir.empty()) write_samples(ctx.output_dir / ("cdf_" + time_tag(cps[c]) + ".csv"), diff[c]);
        if (trivial) continue;
        for (const auto& ref : kBackwardReference) {
            if (std::abs(cps[c] - ref.t) < 1e-12) {
                rep.add("p_positive_t" + time_tag(ref.t), std::abs(p_pos - ref.p_positive) <= kBackwardTolerance,
                        p_pos, "|P(diff > 0) - " + format_double(ref.p_positive) + "| <= " +
                                   format_double(kBackwardTolerance));
            }
        }
    }
    rep.summary["checkpoints"] = per_time;
    rep.summary["switch_disabled"] = trivial;
    if (trivial) rep.add("zero_difference", max_abs == 0.0, max_abs, "max |diff| == 0 without a regime change");
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport forward_revisit(const RunConfig& cfg, const ExperimentContext& ctx) {
    ExperimentReport rep;
    rep.id = "forward-revisit";
    rep.summary = base_summary(cfg);
    if (cfg.pref.family != Family::PowerRatio) {
        throw ValidationError("preference.family", "the revisit study uses the power ratio family");
    }
    const ModelParams& base = cfg.params;
    const auto cps = checkpoints_or(cfg, {15.0});
    const double t_end = std::max(cps.back(), cfg.regime.t0);
    const TimeGrid grid = grid_for(t_end, cfg.sim.steps_per_year);
    const int k0 = grid.index_of(cfg.regime.t0);
    const auto cp_idx = checkpoint_indices(grid, cps);
    std::vector<int> record(cp_idx);
    for (int k = 0; k < k0; ++k) record.push_back(k);

    // Lane 1 re-plans with the promoted salary; lane 2 keeps the rule and
    // model it committed to at time 0.
    std::vector<Lane> lanes{
        {"for1", switched_params(base, cfg.regime), make_forward_policy(cfg.pref, "for1")},
        {"for2", base, make_forward_policy(cfg.pref, "for2")},
    };
    const JointSimulator sim(lanes, grid, record);

    const auto paths = static_cast<std::size_t>(cfg.sim.paths);
    std::vector<double> pre_max(paths);
    std::vector<std::vector<double>> diff(cps.size(), std::vector<double>(paths));
    run_paths(sim, cfg.sim.seed, cfg.sim.paths, ctx.workers, [&](std::size_t i, const PathBundle& b) {
        const auto& l1 = b.lane("for1");
        const auto& l2 = b.lane("for2");
        double m = 0.0;
        for (std::size_t r = 0; r < b.indices.size(); ++r) {
            if (b.indices[r] < k0) m = std::max(m, (l1.pi[r] - l2.pi[r]).cwiseAbs().maxCoeff());
        }
        pre_max[i] = m;
        for (std::size_t c = 0; c < cps.size(); ++c) {
            const auto r = static_cast<std::size_t>(index_in(b, cp_idx[c]));
            diff[c][i] = l1.pi[r](0) - l2.pi[r](0);
        }
    });

    const double pre = *std::max_element(pre_max.begin(), pre_max.end());
    rep.summary["pre_switch_max_abs_diff"] = pre;
    rep.add("pre_switch_equality", pre <= 1e-12, pre, "max over t < t0 of |pi1 - pi2| <= 1e-12");

    const bool trivial = switch_is_trivial(base, cfg.regime);
    json per_time = json::object();
    double max_abs = 0.0;
    for (std::size_t c = 0; c < cps.size(); ++c) {
        const double p_neg = fraction_below(diff[c], 0.0);
        const Summary s = summarize(diff[c]);
        for (double d : diff[c]) max_abs = std::max(max_abs, std::abs(d));
        per_time[time_tag(cps[c])] = {{"p_negative", p_neg}, {"mean", s.mean}, {"stderr", s.stderr_}};
        if (!ctx.output_dir.empty()) write_samples(ctx.output_dir / ("cdf_" + time_tag(cps[c]) + ".csv"), diff[c]);
        if (!trivial && cps[c] > cfg.regime.t0) {
            rep.add("over_investment_t" + time_tag(cps[c]), p_neg >= 0.99, p_neg, "P(pi1 - pi2 < 0) >= 0.99");
        }
    }
    rep.summary["checkpoints"] = per_time;
    rep.summary["switch_disabled"] = trivial;
    if (trivial) rep.add("identical_strategies", max_abs == 0.0, max_abs, "pi1 == pi2 without a regime change");
    return rep;
}

// ---------------------------------------------------------------------------

NoisePath showcase_scenario(const std::string& scenario, const TimeGrid& grid, double ramp) {
    enum Leg { Flat, Up, Down };
    Leg b1 = Flat, b2 = Flat;
    if (scenario == "omega1") {
        b1 = Up;
    } else if (scenario == "omega2") {
        b1 = Flat;
    } else if (scenario == "omega3") {
        b2 = Up;
    } else if (scenario == "omega4") {
        b2 = Down;
    } else {
        throw ValidationError("showcase.replay", "unknown scenario '" + scenario + "'");
    }
    auto level = [&](Leg leg, int k) {
        const double frac = (grid.time(k) - grid.t0) / (grid.t1 - grid.t0);
        return leg == Up ? ramp * frac : leg == Down ? -ramp * frac : 0.0;
    };
    NoiseMatrix l1(grid.steps + 1, 1), l2(grid.steps + 1, 1);
    for (int k = 0; k <= grid.steps; ++k) {
        l1(k, 0) = level(b1, k);
        l2(k, 0) = level(b2, k);
    }
    NoisePath out = noise_from_levels(l1, l2);
    return out;
}

namespace {

double utility_at(const RunConfig& cfg, const PreferenceSpec& pref, const LanePath& lp, std::size_t r, double t,
                  double x) {
    const UtilityField f = make_field(cfg.params, pref, t, lp.Z[r], lp.Gamma[r], lp.V[r], lp.Y[r]);
    const Utility u = evaluate_utility(f, x);
    return u.in_domain ? u.value : -std::numeric_limits<double>::infinity();
}

std::string beta_tag(double beta) { return "beta" + format_double(beta); }

}  // namespace

ExperimentReport power_showcase(const RunConfig& cfg, const ExperimentContext& ctx) {
    ExperimentReport rep;
    rep.id = "power-showcase";
    rep.summary = base_summary(cfg);
    const ModelParams& params = cfg.params;
    const auto& sc = cfg.showcase;
    if (params.n != 1 || params.m != 1) {
        throw ValidationError("market.n", "the showcase scenarios are defined for n = m = 1");
    }
    if (cfg.pref.family != Family::PowerRatio) {
        throw ValidationError("preference.family", "the showcase uses the power ratio family");
    }
    const TimeGrid grid = grid_for(sc.horizon, cfg.sim.steps_per_year);
    const std::vector<std::string> scenarios{"omega1", "omega2", "omega3", "omega4"};
    std::map<std::string, NoisePath> noise;
    for (const auto& s : scenarios) {
        auto it = sc.replay.find(s);
        noise[s] = it != sc.replay.end() ? read_noise_csv(it->second, grid.steps, params.n, params.m)
                                         : showcase_scenario(s, grid, sc.ramp);
    }
    for (const auto& [name, _] : sc.replay) {
        if (std::find(scenarios.begin(), scenarios.end(), name) == scenarios.end()) {
            throw ValidationError("showcase.replay", "unknown scenario '" + name + "'");
        }
    }
    std::vector<int> snaps;
    for (double t : sc.times) {
        if (t > 0.0 && t <= sc.horizon + 1e-12) snaps.push_back(grid.index_of(t));
    }

    const Coefficients c0 = coefficients_at(params, 0.0);
    const PreferenceCoefficients pc0 = preference_at(cfg.pref, 0.0);
    const double myopic = power_myopic(c0, pc0)(0);
    rep.summary["myopic_strategy"] = myopic;
    json baselines = json::object();

    for (double beta : sc.betas) {
        PreferenceSpec pref = cfg.pref;
        pref.beta = Schedule<Vec>(Vec::Constant(1, beta));
        const std::string bt = beta_tag(beta);
        baselines[format_double(beta)] = baseline_policy(c0, pref.beta.at(0.0))(0);

        std::map<std::string, PathBundle> runs;
        const JointSimulator sim({Lane{"forward", params, make_forward_policy(pref, "forward")}}, grid);
        for (const auto& s : scenarios) runs.emplace(s, sim.run(noise.at(s)));

        // Utility at the probe level along each path.
        std::map<std::string, std::vector<double>> probe;
        for (const auto& s : scenarios) {
            const auto& b = runs.at(s);
            const auto& lp = b.lanes.front();
            auto& u = probe[s];
            for (std::size_t r = 0; r < b.times.size(); ++r) u.push_back(utility_at(cfg, pref, lp, r, b.times[r], sc.x_probe));
        }

        if (!ctx.output_dir.empty()) {
            for (const auto& s : scenarios) {
                const auto& b = runs.at(s);
                write_trajectory_csv(ctx.output_dir / ("paths_" + s + "_" + bt + ".csv"), b, "forward");
                for (double t : sc.times) {
                    const auto r = static_cast<std::size_t>(grid.index_of(t));
                    std::vector<std::vector<double>> rows;
                    for (int j = 0; j < sc.x_points; ++j) {
                        const double x = sc.x_min + (sc.x_max - sc.x_min) * j / (sc.x_points - 1);
                        rows.push_back({x, utility_at(cfg, pref, b.lanes.front(), r, t, x)});
                    }
                    write_csv(ctx.output_dir / ("utility_grid_" + s + "_" + bt + "_" + time_tag(t) + ".csv"),
                              {"x", "U"}, rows);
                }
            }
            std::vector<std::vector<double>> rows;
            const auto& times = runs.at("omega1").times;
            for (std::size_t r = 0; r < times.size(); ++r) {
                rows.push_back({times[r], probe["omega1"][r], probe["omega2"][r], probe["omega3"][r],
                                probe["omega4"][r], probe["omega1"][r] - probe["omega2"][r],
                                probe["omega3"][r] - probe["omega4"][r]});
            }
            write_csv(ctx.output_dir / ("utility_probe_" + bt + ".csv"),
                      {"t", "U_omega1", "U_omega2", "U_omega3", "U_omega4", "diff_12", "diff_34"}, rows);
        }

        auto Z = [&](const std::string& s, int k) { return runs.at(s).lanes.front().Z[static_cast<std::size_t>(k)]; };
        auto U = [&](const std::string& s, int k) { return probe.at(s)[static_cast<std::size_t>(k)]; };
        auto PI = [&](const std::string& s, int k) { return runs.at(s).lanes.front().pi[static_cast<std::size_t>(k)](0); };

        // Orderings driven by the sign of the baseline's loading on B1 and by
        // the negative loading -sigmaY2 on B2.
        bool u12 = true, u34 = true, z12 = true, z43 = true;
        double worst12 = std::numeric_limits<double>::infinity(), worst34 = worst12;
        for (int k : snaps) {
            const double d12 = beta < 0 ? U("omega1", k) - U("omega2", k) : U("omega2", k) - U("omega1", k);
            const double d34 = U("omega3", k) - U("omega4", k);
            worst12 = std::min(worst12, d12);
            worst34 = std::min(worst34, d34);
            u12 = u12 && d12 >= 0.0;
            u34 = u34 && d34 >= 0.0;
            z12 = z12 && (beta < 0 ? Z("omega1", k) <= Z("omega2", k) : Z("omega1", k) >= Z("omega2", k));
            z43 = z43 && Z("omega4", k) >= Z("omega3", k);
        }
        rep.add(bt + "_utility_omega1_vs_omega2", u12, worst12,
                beta < 0 ? "U(x_probe) under omega1 >= omega2 at every snapshot"
                         : "U(x_probe) under omega2 >= omega1 at every snapshot");
        rep.add(bt + "_utility_omega3_vs_omega4", u34, worst34, "U(x_probe) under omega3 >= omega4 at every snapshot");
        rep.add(bt + "_floor_omega1_vs_omega2", z12, 0.0,
                beta < 0 ? "Z under omega1 <= omega2 at every snapshot" : "Z under omega1 >= omega2 at every snapshot");
        rep.add(bt + "_floor_omega4_vs_omega3", z43, 0.0, "Z under omega4 >= omega3 at every snapshot");

        const int last = grid.steps;
        const double gap1 = std::abs(PI("omega1", last) - myopic);
        const double gap2 = std::abs(PI("omega2", last) - myopic);
        rep.add(bt + "_omega1_tracks_myopic", gap1 < gap2, gap1 - gap2,
                "|pi(omega1) - myopic| < |pi(omega2) - myopic| at the horizon");
        double spread12 = 0.0, spread34 = 0.0, start = 0.0;
        for (int k = 0; k <= grid.steps; ++k) {
            spread12 = std::max(spread12, std::abs(PI("omega1", k) - PI("omega2", k)));
            spread34 = std::max(spread34, std::abs(PI("omega3", k) - PI("omega4", k)));
        }
        for (const auto& s : scenarios) start = std::max(start, std::abs(PI(s, 0) - myopic));
        rep.add(bt + "_omega3_omega4_close", spread34 < spread12, spread34 - spread12,
                "max_t |pi(omega3) - pi(omega4)| < max_t |pi(omega1) - pi(omega2)|");
        rep.add(bt + "_starts_myopic", start <= 1e-12, start, "pi_0 equals the myopic strategy in every scenario");
    }
    rep.summary["baseline_strategy"] = baselines;
    return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport run_experiment(const std::string& id, const RunConfig& cfg, const ExperimentContext& ctx) {
    if (id == "backward-pitfall") return backward_pitfall(cfg, ctx);
    if (id == "forward-revisit") return forward_revisit(cfg, ctx);
    if (id == "power-showcase") return power_showcase(cfg, ctx);
    throw ValidationError("experiment", "unknown experiment '" + id + "'");
}

ExperimentReport run_verification(const std::string& id, const RunConfig& cfg, const ExperimentContext& ctx) {
    if (id == "martingale") return martingale_suite(cfg, ctx);
    if (id == "spde") return spde_suite(cfg, ctx);
    if (id == "integrator") return integrator_suite(cfg, ctx);
    throw ValidationError("verify", "unknown suite '" + id + "'");
}

}  // namespace fpension
