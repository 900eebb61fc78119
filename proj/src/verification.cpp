#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fpension/experiments.hpp"
#include "fpension/preferences.hpp"
#include "fpension/strategies.hpp"
#include "mc_common.hpp"

namespace fpension {

using nlohmann::json;
using detail::grid_for;
using detail::index_in;
using detail::run_paths;
using detail::time_tag;

namespace {

// A preference of the requested family built from the configured one. The
// baseline of the other kind of family is filled with zeros when absent.
PreferenceSpec preference_for(const RunConfig& cfg, Family family) {
    PreferenceSpec pref = cfg.pref;
    pref.family = family;
    const int n = cfg.params.n;
    if (pref.beta.at(0.0).size() != n) pref.beta = Schedule<Vec>(Vec::Zero(n));
    if (pref.pitilde.at(0.0).size() != n) pref.pitilde = Schedule<Vec>(Vec::Zero(n));
    pref.validate(cfg.params.n, cfg.params.m);
    return pref;
}

double lane_utility(const ModelParams& params, const PreferenceSpec& pref, const LanePath& lp, std::size_t r,
                    double t) {
    const UtilityField f = make_field(params, pref, t, lp.Z[r], lp.Gamma[r], lp.V[r], lp.Y[r]);
    const double x = is_wealth(pref.family) ? lp.W[r] : lp.X[r];
    const Utility u = evaluate_utility(f, x);
    if (!u.in_domain) {
        throw AdmissibilityError("lane " + lp.id + " left the utility domain at t = " + format_double(t));
    }
    return u.value;
}

ModelParams frozen_params(const ModelParams& params, double t) {
    ModelParams f = params;
    f.mu = Schedule<Vec>(params.mu.at(t));
    f.Sigma = Schedule<Mat>(params.Sigma.at(t));
    f.muY = Schedule<double>(params.muY.at(t));
    f.sigmaY1 = Schedule<Vec>(params.sigmaY1.at(t));
    f.sigmaY2 = Schedule<Vec>(params.sigmaY2.at(t));
    f.p = Schedule<double>(params.p.at(t));
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// Martingale suite: the optimal utility process keeps its mean and
// perturbed rules lose utility on average.

ExperimentReport martingale_suite(const RunConfig& cfg, const ExperimentContext& ctx) {
    ExperimentReport rep;
    rep.id = "martingale";
    rep.summary = {{"paths", cfg.sim.paths}, {"seed", cfg.sim.seed}, {"steps_per_year", cfg.sim.steps_per_year}};
    auto cps = cfg.sim.checkpoints.empty() ? std::vector<double>{2.0, 5.0, 10.0, 15.0, 20.0} : cfg.sim.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    const TimeGrid grid = grid_for(cps.back(), cfg.sim.steps_per_year);
    const auto idx = checkpoint_indices(grid, cps);
    const auto paths = static_cast<std::size_t>(cfg.sim.paths);
    const ModelParams& params = cfg.params;

    json fam_summary = json::object();
    for (const auto& fname : cfg.martingale.families) {
        const Family family = family_from_string(fname);
        const PreferenceSpec pref = preference_for(cfg, family);
        std::vector<Lane> lanes{{"optimal", params, make_forward_policy(pref, "optimal")}};
        for (double s : cfg.martingale.perturbations) {
            lanes.push_back({"scaled_" + format_double(s), params, make_forward_policy(pref, "scaled", s)});
        }
        const std::size_t L = lanes.size();
        const JointSimulator sim(lanes, grid, idx);
        const double x0 = is_wealth(family) ? params.w0 : params.x0();
        const double u0 = evaluate_utility(initial_field(params, pref), x0).value;

        // utility[lane][checkpoint][path]
        std::vector<std::vector<std::vector<double>>> U(
            L, std::vector<std::vector<double>>(cps.size(), std::vector<double>(paths)));
        run_paths(sim, cfg.sim.seed, cfg.sim.paths, ctx.workers, [&](std::size_t i, const PathBundle& b) {
            for (std::size_t l = 0; l < L; ++l) {
                const auto& lp = b.lanes[l];
                for (std::size_t c = 0; c < cps.size(); ++c) {
                    const auto r = static_cast<std::size_t>(index_in(b, idx[c]));
                    U[l][c][i] = lane_utility(params, pref, lp, r, b.times[r]);
                }
            }
        });

        json fs = {{"u0", u0}};
        json opt = json::array();
        for (std::size_t c = 0; c < cps.size(); ++c) {
            const Summary s = summarize(U[0][c]);
            const double z = (s.mean - u0) / s.stderr_;
            opt.push_back({{"t", cps[c]}, {"mean", s.mean}, {"stderr", s.stderr_}});
            rep.add(fname + "_optimal_t" + time_tag(cps[c]), std::abs(s.mean - u0) <= 3.0 * s.stderr_, z,
                    "|mean U* - U(x0, 0)| <= 3 standard errors");
        }
        fs["optimal"] = opt;

        for (std::size_t l = 1; l < L; ++l) {
            const std::string tag = fname + "_" + lanes[l].id;
            json lane_rows = json::array();
            std::vector<double> inc(paths);
            for (std::size_t c = 0; c < cps.size(); ++c) {
                for (std::size_t i = 0; i < paths; ++i) inc[i] = U[l][c][i] - (c == 0 ? u0 : U[l][c - 1][i]);
                const Summary s = summarize(inc);
                lane_rows.push_back({{"t", cps[c]}, {"mean_increment", s.mean}, {"stderr", s.stderr_}});
                rep.add(tag + "_increment_t" + time_tag(cps[c]), s.mean <= 3.0 * s.stderr_,
                        s.stderr_ > 0 ? s.mean / s.stderr_ : 0.0,
                        "mean utility increment <= 3 standard errors (no significant gain)");
            }
            std::vector<double> deficit(paths);
            const std::size_t last = cps.size() - 1;
            for (std::size_t i = 0; i < paths; ++i) deficit[i] = U[l][last][i] - U[0][last][i];
            const Summary d = summarize(deficit);
            rep.add(tag + "_deficit_t" + time_tag(cps[last]), d.mean < -3.0 * d.stderr_,
                    d.stderr_ > 0 ? d.mean / d.stderr_ : 0.0,
                    "mean(U_perturbed - U_optimal) < -3 standard errors at the last checkpoint");
            fs[lanes[l].id] = {{"increments", lane_rows}, {"final_deficit", d.mean}, {"final_deficit_stderr", d.stderr_}};
        }
        fam_summary[fname] = fs;
    }
    rep.summary["families"] = fam_summary;
    return rep;
}

// ---------------------------------------------------------------------------
// Drift identity: the drift forced by optimality equals the direct Ito drift
// of the closed-form field, and the policy read off the field equals the
// closed-form rule, on randomly drawn two-asset coefficients.

namespace {

struct SpdeSample {
    UtilityField field;
    double x_tilde = 0.0;
};

SpdeSample draw_sample(std::mt19937_64& rng, Family family) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
    auto vec = [&](int k, double a, double b) {
        Vec v(k);
        for (int i = 0; i < k; ++i) v(i) = uni(a, b);
        return v;
    };
    constexpr int n = 2, m = 2;
    ModelParams params;
    params.n = n;
    params.m = m;
    params.r = uni(0.0, 0.05);
    params.mu = Schedule<Vec>(vec(n, 0.01, 0.1));
    Mat sig(n, n);
    sig << uni(0.15, 0.3), uni(-0.05, 0.05), uni(-0.05, 0.05), uni(0.15, 0.3);
    params.Sigma = Schedule<Mat>(sig);
    params.muY = Schedule<double>(uni(-0.02, 0.06));
    params.sigmaY1 = Schedule<Vec>(vec(n, -0.1, 0.1));
    params.sigmaY2 = Schedule<Vec>(vec(m, -0.1, 0.1));
    params.p = Schedule<double>(uni(0.0, 0.2));
    params.y0 = uni(0.5, 2.0);

    PreferenceSpec pref;
    pref.family = family;
    pref.gamma = is_power(family) ? uni(0.1, 0.9) : uni(0.2, 3.0);
    pref.theta1 = Schedule<Vec>(vec(n, -0.3, 0.3));
    pref.theta2 = Schedule<Vec>(vec(m, -0.3, 0.3));
    pref.beta = Schedule<Vec>(vec(n, -0.3, 0.3));
    pref.pitilde = Schedule<Vec>(vec(n, -0.5, 1.0));

    const double z = is_power(family) ? uni(0.0, 3.0) : uni(-2.0, 2.0);
    const double gamma_t = uni(0.2, 3.0);
    const double v = uni(-1.0, 1.0);
    const double salary = uni(0.5, 2.0);
    SpdeSample s{make_field(params, pref, 0.0, z, gamma_t, v, salary), 0.0};
    s.x_tilde = is_power(family) ? uni(0.05, 5.0) : uni(-3.0, 3.0);
    if (!is_power(family) && std::abs(s.x_tilde + z) < 1e-3) s.x_tilde += 0.1;  // keep away from x = 0
    return s;
}

Vec closed_form_policy(const UtilityField& f, double x) {
    switch (f.family) {
        case Family::PowerRatio: return forward_power_policy(x, f.z, f.c, f.pc);
        case Family::ExpRatio: return forward_exp_policy(x, f.gamma_t, f.c, f.pc);
        case Family::PowerWealth: return forward_powerW_policy(x, f.z, f.c, f.pc);
        case Family::ExpWealth: return forward_expW_policy(x, f.gamma_t, f.c, f.pc);
    }
    return {};
}

}  // namespace

ExperimentReport spde_suite(const RunConfig& cfg, const ExperimentContext&) {
    ExperimentReport rep;
    rep.id = "spde";
    rep.summary = {{"samples", cfg.spde.samples}, {"seed", cfg.sim.seed}};
    std::mt19937_64 rng(cfg.sim.seed);
    constexpr double kDriftTol = 1e-9;
    constexpr double kPolicyTol = 1e-10;
    for (Family family : {Family::PowerRatio, Family::ExpRatio, Family::PowerWealth, Family::ExpWealth}) {
        double worst_drift = 0.0, worst_policy = 0.0;
        for (int k = 0; k < cfg.spde.samples; ++k) {
            const SpdeSample s = draw_sample(rng, family);
            const SpdeContext sc = canonical_context(s.field);
            const double x = s.x_tilde + sc.z;
            const double u = evaluate_utility(s.field, x).value;
            const double b = spde_drift(s.field, s.x_tilde, sc);
            const double ito = ito_drift(s.field, s.x_tilde);
            worst_drift = std::max(worst_drift, std::abs(b - ito) / std::abs(u));
            const Vec pi = spde_policy(s.field, s.x_tilde, sc);
            const Vec ref = closed_form_policy(s.field, x);
            worst_policy = std::max(worst_policy, (pi - ref).norm() / std::max(1.0, ref.norm()));
        }
        const std::string name(to_string(family));
        rep.summary[name] = {{"max_drift_residual", worst_drift}, {"max_policy_residual", worst_policy}};
        rep.add(name + "_drift", worst_drift < kDriftTol, worst_drift, "max |b - Ito drift| / |U| < 1e-9");
        rep.add(name + "_policy", worst_policy < kPolicyTol, worst_policy,
                "max |pi_field - pi_closed| / max(1, |pi_closed|) < 1e-10");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Integrator checks.

ExperimentReport integrator_suite(const RunConfig& cfg, const ExperimentContext& ctx) {
    ExperimentReport rep;
    rep.id = "integrator";
    const auto& cc = cfg.consistency;
    if (cfg.params.n != 1) throw ValidationError("market.n", "the integrator checks use a single risky asset");
    if (cc.steps_per_year.size() < 2) {
        throw ValidationError("consistency.steps_per_year", "need at least two refinement levels");
    }
    auto levels = cc.steps_per_year;
    std::sort(levels.begin(), levels.end());
    const int finest = levels.back();
    for (int l : levels) {
        if (l <= 0 || finest % l != 0) {
            throw ValidationError("consistency.steps_per_year", "every level must divide the finest one");
        }
    }
    const TimeGrid fine = grid_for(cc.horizon, finest);
    const auto paths = static_cast<std::size_t>(cc.paths);

    // Geometric case: no contributions and a fixed weight make the ratio a
    // geometric Brownian motion with a closed-form terminal value.
    ModelParams gbm = frozen_params(cfg.params, 0.0);
    gbm.p = Schedule<double>(0.0);
    const Coefficients c = coefficients_at(gbm, 0.0);
    // A balanced fixed weight keeps the terminal error distribution light
    // tailed; a leveraged weight makes the RMS estimate outlier driven.
    const Vec weight = Vec::Constant(cfg.params.n, 0.5);
    const StrategyPolicy fixed = make_constant_policy(Schedule<Vec>(weight), "fixed");
    const Vec b1 = c.sigma.transpose() * weight - c.sigmaY1;
    const Vec b2 = -c.sigmaY2;
    const double a = weight.dot(c.sigma * (c.lambda - c.sigmaY1)) - c.muY + c.sigmaY1.squaredNorm() +
                     c.sigmaY2.squaredNorm();
    const double log_drift = a - 0.5 * (b1.squaredNorm() + b2.squaredNorm());
    const double x0 = gbm.x0();

    // Consistency case: the configured contributions, same fixed weight.
    const ModelParams plan = frozen_params(cfg.params, 0.0);

    const std::size_t L = levels.size();
    std::vector<std::vector<double>> sq_err(L, std::vector<double>(paths));
    std::vector<std::vector<double>> gap(L, std::vector<double>(paths));
    parallel_for(paths, ctx.workers, [&](std::size_t i) {
        const NoisePath noise = generate_noise(cfg.sim.seed, i, fine, gbm.n, gbm.m);
        const Vec B1 = noise.dB1.colwise().sum().transpose();
        const Vec B2 = noise.dB2.colwise().sum().transpose();
        const double exact = x0 * std::exp(log_drift * cc.horizon + b1.dot(B1) + b2.dot(B2));
        for (std::size_t l = 0; l < L; ++l) {
            const int factor = finest / levels[l];
            const NoisePath coarse = factor == 1 ? noise : coarsen(noise, factor);
            const TimeGrid g = grid_for(cc.horizon, levels[l]);
            const PathBundle run = simulate_ratio_path(gbm, fixed, coarse, g);
            const double err = run.lanes.front().X.back() - exact;
            sq_err[l][i] = err * err;
            const PathBundle ratio = simulate_ratio_path(plan, fixed, coarse, g);
            const DirectWealthPath direct = simulate_wealth_direct(plan, fixed, coarse, g);
            gap[l][i] = direct.X.back() - ratio.lanes.front().X.back();
        }
    });

    json strong = json::array();
    json weak = json::array();
    std::vector<double> rms(L), mean_gap(L);
    for (std::size_t l = 0; l < L; ++l) {
        rms[l] = std::sqrt(summarize(sq_err[l]).mean);
        const Summary g = summarize(gap[l]);
        mean_gap[l] = g.mean;
        strong.push_back({{"steps_per_year", levels[l]}, {"rms_error", rms[l]}});
        weak.push_back({{"steps_per_year", levels[l]}, {"mean_gap", g.mean}, {"stderr", g.stderr_}});
    }
    for (std::size_t l = 1; l < L; ++l) {
        const double ratio = rms[l] / rms[l - 1];
        const double refine = static_cast<double>(levels[l]) / levels[l - 1];
        const double order = -std::log(ratio) / std::log(refine);
        strong[l]["ratio"] = ratio;
        strong[l]["observed_order"] = order;
        const std::string tag = std::to_string(levels[l - 1]) + "_" + std::to_string(levels[l]);
        rep.add("strong_error_ratio_" + tag, ratio >= 0.35 && ratio <= 0.65, ratio,
                "RMS terminal error ratio per halving in [0.35, 0.65]");
        // Euler-Maruyama with multiplicative noise converges strongly at order 1/2.
        rep.add("strong_order_" + tag, std::abs(order - 0.5) <= 0.15, order,
                "observed strong order within 0.15 of 0.5");
    }
    for (std::size_t l = 1; l < L; ++l) {
        const double ratio = std::abs(mean_gap[l]) / std::abs(mean_gap[l - 1]);
        weak[l]["ratio"] = ratio;
        rep.add("wealth_ratio_gap_" + std::to_string(levels[l - 1]) + "_" + std::to_string(levels[l]),
                ratio >= 0.35 && ratio <= 0.65, ratio,
                "|mean(W/Y - X)| halves per halving of the step, within 30%");
    }
    rep.summary = {{"paths", cc.paths},
                   {"horizon", cc.horizon},
                   {"seed", cfg.sim.seed},
                   {"weight", weight(0)},
                   {"strong", strong},
                   {"wealth_vs_ratio", weak}};
    return rep;
}

}  // namespace fpension
