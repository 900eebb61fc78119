#pragma once

// Closed-form feedback investment rules. Every rule is a pure function of the
// time, the observed state and the coefficient values at that time.

#include <functional>
#include <string>

#include "fpension/model.hpp"

namespace fpension {

// ---------------------------------------------------------------------------
// Annuity factors (risk-neutral value of one unit of salary paid over [t, T])

/// Integral of exp(k s) over [0, tau], i.e. expm1(k tau) / k, with a short
/// series near k tau = 0 so the k -> 0 limit tau is reached continuously.
double growth_integral(double k, double tau);

/// (exp(k (T - t)) - 1) / k with k = muY - lambda sigmaY1; T - t in the limit k -> 0.
double annuity_factor(double muY, double lambda, double sigmaY1, double t, double T);

/// Annuity factor when the salary premium jumps from muY to muY_tilde at t0.
double annuity_factor_switch(double muY, double muY_tilde, double lambda, double sigmaY1, double t, double t0,
                             double T);

/// Annuity factor under the full piecewise-constant salary schedule of a
/// scalar market, integrating across every regime in [t, T].
double annuity_factor_schedule(const ModelParams& params, double t, double T);

// ---------------------------------------------------------------------------
// Backward (horizon-T, CRRA) rules, single risky asset only

struct BackwardPlan {
    double horizon = 20.0;  // retirement time T
    double gamma = 0.5;     // CRRA parameter of the terminal utility
};

/// sigmaY1/sigma + (lambda - sigmaY1)/(sigma (1 - gamma)) (1 + p F / x).
/// With `use_schedule` the annuity factor integrates the salary schedule over
/// [t, T] (the rule of a worker who knows the future regimes); otherwise the
/// current premium is assumed to last until T.
double backward_policy(double t, double x, const BackwardPlan& plan, const ModelParams& params, bool use_schedule);

/// The same rule with the annuity factor supplied by the caller. Only x = 0
/// is rejected: a simulated fund can dip below zero under this rule (the sum
/// of fund and discounted future contributions stays positive, the fund
/// alone need not), and the weight is still well defined there.
double backward_weight(const Coefficients& c, double gamma, double annuity, double x);

// ---------------------------------------------------------------------------
// Forward rules

/// (Sigma^T)^{-1} (sigmaY1 + beta).
Vec baseline_policy(const Coefficients& c, const Vec& beta);
Vec baseline_policy(const ModelParams& params, const Vec& beta, double t);

/// (Sigma^T)^{-1} (lambda - gamma sigmaY1 + theta1) / (1 - gamma).
Vec power_myopic(const Coefficients& c, const PreferenceCoefficients& pc);

/// (Sigma^T)^{-1} (lambda + theta1) / (1 - gamma), wealth variant.
Vec power_wealth_myopic(const Coefficients& c, const PreferenceCoefficients& pc);

/// (Sigma^T)^{-1} (lambda + theta1), exponential families.
Vec exp_myopic(const Coefficients& c, const PreferenceCoefficients& pc);

/// (z/x) pihat + (1 - z/x) myopic. Throws AdmissibilityError unless x > z >= 0.
Vec forward_power_policy(double x, double z, const Coefficients& c, const PreferenceCoefficients& pc);
Vec forward_power_policy(double t, double x, double z, const ModelParams& params, const PreferenceSpec& pref);

/// (Gamma/x) (Sigma^T)^{-1}(lambda + theta1) + (1 - Gamma/x) pihat. Throws DomainError if x == 0.
Vec forward_exp_policy(double x, double gamma_t, const Coefficients& c, const PreferenceCoefficients& pc);
Vec forward_exp_policy(double t, double x, double gamma_t, const ModelParams& params, const PreferenceSpec& pref);

/// (W0/W) pitilde + (1 - W0/W) (Sigma^T)^{-1}(lambda + theta1)/(1 - gamma).
Vec forward_powerW_policy(double w, double w_floor, const Coefficients& c, const PreferenceCoefficients& pc);
Vec forward_powerW_policy(double t, double w, double w_floor, const ModelParams& params, const PreferenceSpec& pref);

/// (Gt/W) (Sigma^T)^{-1}(lambda + theta1) + (1 - Gt/W) pitilde.
Vec forward_expW_policy(double w, double gamma_tilde, const Coefficients& c, const PreferenceCoefficients& pc);
Vec forward_expW_policy(double t, double w, double gamma_tilde, const ModelParams& params, const PreferenceSpec& pref);

// ---------------------------------------------------------------------------
// Policy objects used by the simulation engine

enum class PolicyKind {
    Backward,          // horizon rule, current premium assumed constant
    BackwardAdapting,  // same rule; re-planned whenever the premium changes
    BackwardOracle,    // annuity factor integrates the known salary schedule
    Baseline,
    ForwardPower,
    ForwardExp,
    ForwardPowerWealth,
    ForwardExpWealth,
    Constant,
    Custom,
};

std::string_view to_string(PolicyKind k);

/// Observed state handed to a policy by the engine.
struct PolicyState {
    double x = 0.0;            // fund-to-salary ratio X
    double z = 0.0;            // baseline ratio floor X^{pihat,0}
    double gamma_ratio = 0.0;  // Gamma (ratio, exponential family)
    double w = 0.0;            // absolute fund value W
    double w_floor = 0.0;      // W^{pitilde,0}
    double gamma_wealth = 0.0; // Gamma tilde
};

using CustomRule = std::function<Vec(double t, const PolicyState&, const Coefficients&)>;

struct StrategyPolicy {
    PolicyKind kind = PolicyKind::Baseline;
    std::string id;
    PreferenceSpec pref;  // forward kinds and Baseline (beta)
    BackwardPlan backward;
    /// Multiplies the non-baseline component; 1 gives the optimal rule.
    double target_scale = 1.0;
    Schedule<Vec> weights;  // Constant
    CustomRule custom;

    Vec evaluate(double t, const PolicyState& s, const Coefficients& c, const PreferenceCoefficients& pc) const;
    Vec evaluate(double t, const PolicyState& s, const ModelParams& params) const;

    /// The vector the rule leans towards away from its floor (myopic term,
    /// scaled by target_scale). Only meaningful for the forward kinds.
    Vec target(const Coefficients& c, const PreferenceCoefficients& pc) const;

    /// Baseline strategy of the forward kinds (pihat or pitilde).
    Vec baseline(const Coefficients& c, const PreferenceCoefficients& pc) const;

    bool is_backward() const;
    bool is_forward() const;
};

StrategyPolicy make_backward_policy(const BackwardPlan& plan, PolicyKind kind, std::string id);
StrategyPolicy make_baseline_policy(const PreferenceSpec& pref, std::string id = "baseline");
/// Optimal rule of the preference family in `pref`.
StrategyPolicy make_forward_policy(const PreferenceSpec& pref, std::string id, double target_scale = 1.0);
StrategyPolicy make_constant_policy(Schedule<Vec> weights, std::string id = "constant");
StrategyPolicy make_custom_policy(CustomRule rule, std::string id = "custom");

}  // namespace fpension
