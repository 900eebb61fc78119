#include "fpension/strategies.hpp"

#include <cmath>

#include "fpension/io.hpp"

namespace fpension {

namespace {

void require_scalar_market(const ModelParams& params) {
    if (params.n != 1) {
        throw DomainError("the backward rule is only available for a single risky asset");
    }
}

}  // namespace

double growth_integral(double k, double tau) {
    if (tau <= 0.0) return 0.0;
    if (std::abs(k) < 1e-10) return tau;
    const double kt = k * tau;
    if (std::abs(kt) < 1e-6) {
        return tau * (1.0 + kt / 2.0 + kt * kt / 6.0);
    }
    return std::expm1(kt) / k;
}

double annuity_factor(double muY, double lambda, double sigmaY1, double t, double T) {
    if (T < t) throw DomainError("annuity factor needs t <= T");
    return growth_integral(muY - lambda * sigmaY1, T - t);
}

double annuity_factor_switch(double muY, double muY_tilde, double lambda, double sigmaY1, double t, double t0,
                             double T) {
    if (t < 0.0 || T < t) throw DomainError("switched annuity factor needs 0 <= t <= T");
    if (!(t0 > 0.0 && t0 < T)) throw DomainError("switched annuity factor needs 0 < t0 < T");
    // Identical premiums must give exactly the unswitched factor.
    if (muY == muY_tilde || t >= t0) {
        return annuity_factor(t >= t0 ? muY_tilde : muY, lambda, sigmaY1, t, T);
    }
    const double k = muY - lambda * sigmaY1;
    return growth_integral(k, t0 - t) + std::exp(k * (t0 - t)) * annuity_factor(muY_tilde, lambda, sigmaY1, t0, T);
}

double annuity_factor_schedule(const ModelParams& params, double t, double T) {
    require_scalar_market(params);
    if (T < t) throw DomainError("annuity factor needs t <= T");
    std::vector<double> cuts{t};
    for (double b : params.breakpoints()) {
        if (b > t + kBreakpointTolerance && b < T - kBreakpointTolerance) cuts.push_back(b);
    }
    cuts.push_back(T);
    double f = 0.0;
    double log_growth = 0.0;  // integral of k from t to the start of the piece
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const Coefficients c = coefficients_at(params, cuts[i]);
        const double k = c.muY - c.lambda(0) * c.sigmaY1(0);
        const double len = cuts[i + 1] - cuts[i];
        f += std::exp(log_growth) * growth_integral(k, len);
        log_growth += k * len;
    }
    return f;
}

double backward_policy(double t, double x, const BackwardPlan& plan, const ModelParams& params, bool use_schedule) {
    require_scalar_market(params);
    if (!(plan.gamma < 1.0) || plan.gamma == 0.0) {
        throw DomainError("backward rule needs gamma < 1, gamma != 0");
    }
    if (t > plan.horizon) throw DomainError("backward rule evaluated after the horizon");
    if (!(x > 0.0)) throw DomainError("backward rule needs x > 0");
    const Coefficients c = coefficients_at(params, t);
    const double F = use_schedule ? annuity_factor_schedule(params, t, plan.horizon)
                                  : annuity_factor(c.muY, c.lambda(0), c.sigmaY1(0), t, plan.horizon);
    return backward_weight(c, plan.gamma, F, x);
}

double backward_weight(const Coefficients& c, double gamma, double annuity, double x) {
    if (x == 0.0 || !std::isfinite(x)) throw DomainError("backward weight is singular at x = 0");
    const double sigma = c.sigma(0, 0);
    const double lambda = c.lambda(0);
    const double s1 = c.sigmaY1(0);
    return s1 / sigma + (lambda - s1) / (sigma * (1.0 - gamma)) * (1.0 + c.p * annuity / x);
}

Vec baseline_policy(const Coefficients& c, const Vec& beta) { return c.sigma_t_inv * (c.sigmaY1 + beta); }

Vec baseline_policy(const ModelParams& params, const Vec& beta, double t) {
    return baseline_policy(coefficients_at(params, t), beta);
}

Vec power_myopic(const Coefficients& c, const PreferenceCoefficients& pc) {
    return c.sigma_t_inv * (c.lambda - pc.gamma * c.sigmaY1 + pc.theta1) / (1.0 - pc.gamma);
}

Vec power_wealth_myopic(const Coefficients& c, const PreferenceCoefficients& pc) {
    return c.sigma_t_inv * (c.lambda + pc.theta1) / (1.0 - pc.gamma);
}

Vec exp_myopic(const Coefficients& c, const PreferenceCoefficients& pc) {
    return c.sigma_t_inv * (c.lambda + pc.theta1);
}

Vec forward_power_policy(double x, double z, const Coefficients& c, const PreferenceCoefficients& pc) {
    if (!(x > z) || z < 0.0) {
        throw AdmissibilityError("power rule needs x > z >= 0 (x = " + format_double(x) + ", z = " + format_double(z) +
                                 ")");
    }
    const double w = z / x;
    return w * baseline_policy(c, pc.beta) + (1.0 - w) * power_myopic(c, pc);
}

Vec forward_power_policy(double t, double x, double z, const ModelParams& params, const PreferenceSpec& pref) {
    return forward_power_policy(x, z, coefficients_at(params, t), preference_at(pref, t));
}

Vec forward_exp_policy(double x, double gamma_t, const Coefficients& c, const PreferenceCoefficients& pc) {
    if (x == 0.0) throw DomainError("exponential rule is undefined at x = 0");
    const double w = gamma_t / x;
    return w * exp_myopic(c, pc) + (1.0 - w) * baseline_policy(c, pc.beta);
}

Vec forward_exp_policy(double t, double x, double gamma_t, const ModelParams& params, const PreferenceSpec& pref) {
    return forward_exp_policy(x, gamma_t, coefficients_at(params, t), preference_at(pref, t));
}

Vec forward_powerW_policy(double w, double w_floor, const Coefficients& c, const PreferenceCoefficients& pc) {
    if (!(w > w_floor) || w_floor < 0.0) {
        throw AdmissibilityError("wealth power rule needs W > W0 >= 0 (W = " + format_double(w) +
                                 ", W0 = " + format_double(w_floor) + ")");
    }
    const double s = w_floor / w;
    return s * pc.pitilde + (1.0 - s) * power_wealth_myopic(c, pc);
}

Vec forward_powerW_policy(double t, double w, double w_floor, const ModelParams& params, const PreferenceSpec& pref) {
    return forward_powerW_policy(w, w_floor, coefficients_at(params, t), preference_at(pref, t));
}

Vec forward_expW_policy(double w, double gamma_tilde, const Coefficients& c, const PreferenceCoefficients& pc) {
    if (w == 0.0) throw DomainError("wealth exponential rule is undefined at W = 0");
    const double s = gamma_tilde / w;
    return s * exp_myopic(c, pc) + (1.0 - s) * pc.pitilde;
}

Vec forward_expW_policy(double t, double w, double gamma_tilde, const ModelParams& params, const PreferenceSpec& pref) {
    return forward_expW_policy(w, gamma_tilde, coefficients_at(params, t), preference_at(pref, t));
}

std::string_view to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::Backward: return "backward";
        case PolicyKind::BackwardAdapting: return "backward_adapting";
        case PolicyKind::BackwardOracle: return "backward_oracle";
        case PolicyKind::Baseline: return "baseline";
        case PolicyKind::ForwardPower: return "forward_power";
        case PolicyKind::ForwardExp: return "forward_exp";
        case PolicyKind::ForwardPowerWealth: return "forward_powerW";
        case PolicyKind::ForwardExpWealth: return "forward_expW";
        case PolicyKind::Constant: return "constant";
        case PolicyKind::Custom: return "custom";
    }
    return "unknown";
}

bool StrategyPolicy::is_backward() const {
    return kind == PolicyKind::Backward || kind == PolicyKind::BackwardAdapting || kind == PolicyKind::BackwardOracle;
}

bool StrategyPolicy::is_forward() const {
    return kind == PolicyKind::ForwardPower || kind == PolicyKind::ForwardExp ||
           kind == PolicyKind::ForwardPowerWealth || kind == PolicyKind::ForwardExpWealth;
}

Vec StrategyPolicy::baseline(const Coefficients& c, const PreferenceCoefficients& pc) const {
    if (kind == PolicyKind::ForwardPowerWealth || kind == PolicyKind::ForwardExpWealth) return pc.pitilde;
    return baseline_policy(c, pc.beta);
}

Vec StrategyPolicy::target(const Coefficients& c, const PreferenceCoefficients& pc) const {
    switch (kind) {
        case PolicyKind::ForwardPower: return target_scale * power_myopic(c, pc);
        case PolicyKind::ForwardPowerWealth: return target_scale * power_wealth_myopic(c, pc);
        case PolicyKind::ForwardExp:
        case PolicyKind::ForwardExpWealth: return target_scale * exp_myopic(c, pc);
        default: throw DomainError("policy '" + id + "' has no forward target");
    }
}

Vec StrategyPolicy::evaluate(double t, const PolicyState& s, const Coefficients& c,
                             const PreferenceCoefficients& pc) const {
    switch (kind) {
        case PolicyKind::Baseline: return baseline_policy(c, pc.beta);
        case PolicyKind::Constant: return weights.at(t);
        case PolicyKind::Custom: return custom(t, s, c);
        case PolicyKind::ForwardPower: {
            if (!(s.x > s.z) || s.z < 0.0) throw AdmissibilityError("power rule left its domain x > z");
            const double w = s.z / s.x;
            return w * baseline(c, pc) + (1.0 - w) * target(c, pc);
        }
        case PolicyKind::ForwardPowerWealth: {
            if (!(s.w > s.w_floor) || s.w_floor < 0.0) throw AdmissibilityError("wealth power rule left W > W0");
            const double w = s.w_floor / s.w;
            return w * baseline(c, pc) + (1.0 - w) * target(c, pc);
        }
        case PolicyKind::ForwardExp: {
            if (s.x == 0.0) throw DomainError("exponential rule is undefined at x = 0");
            const double w = s.gamma_ratio / s.x;
            return w * target(c, pc) + (1.0 - w) * baseline(c, pc);
        }
        case PolicyKind::ForwardExpWealth: {
            if (s.w == 0.0) throw DomainError("wealth exponential rule is undefined at W = 0");
            const double w = s.gamma_wealth / s.w;
            return w * target(c, pc) + (1.0 - w) * baseline(c, pc);
        }
        default: break;
    }
    throw DomainError("backward rules need the model parameters; use the ModelParams overload");
}

Vec StrategyPolicy::evaluate(double t, const PolicyState& s, const ModelParams& params) const {
    if (is_backward()) {
        Vec out(1);
        out(0) = backward_policy(t, s.x, backward, params, kind == PolicyKind::BackwardOracle);
        return out;
    }
    const bool needs_pref = kind != PolicyKind::Constant && kind != PolicyKind::Custom;
    return evaluate(t, s, coefficients_at(params, t),
                    needs_pref ? preference_at(pref, t) : PreferenceCoefficients{});
}

StrategyPolicy make_backward_policy(const BackwardPlan& plan, PolicyKind kind, std::string id) {
    StrategyPolicy p;
    p.kind = kind;
    p.backward = plan;
    p.id = std::move(id);
    if (!p.is_backward()) throw DomainError("make_backward_policy needs a backward kind");
    return p;
}

StrategyPolicy make_baseline_policy(const PreferenceSpec& pref, std::string id) {
    StrategyPolicy p;
    p.kind = PolicyKind::Baseline;
    p.pref = pref;
    p.id = std::move(id);
    return p;
}

StrategyPolicy make_forward_policy(const PreferenceSpec& pref, std::string id, double target_scale) {
    StrategyPolicy p;
    switch (pref.family) {
        case Family::PowerRatio: p.kind = PolicyKind::ForwardPower; break;
        case Family::ExpRatio: p.kind = PolicyKind::ForwardExp; break;
        case Family::PowerWealth: p.kind = PolicyKind::ForwardPowerWealth; break;
        case Family::ExpWealth: p.kind = PolicyKind::ForwardExpWealth; break;
    }
    p.pref = pref;
    p.id = std::move(id);
    p.target_scale = target_scale;
    return p;
}

StrategyPolicy make_constant_policy(Schedule<Vec> weights, std::string id) {
    StrategyPolicy p;
    p.kind = PolicyKind::Constant;
    p.weights = std::move(weights);
    p.id = std::move(id);
    return p;
}

StrategyPolicy make_custom_policy(CustomRule rule, std::string id) {
    StrategyPolicy p;
    p.kind = PolicyKind::Custom;
    p.custom = std::move(rule);
    p.id = std::move(id);
    return p;
}

}  // namespace fpension
