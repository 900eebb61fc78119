#pragma once

// Forward utility random fields evaluated on a realized state, their
// volatility fields and the drift identity they must satisfy.

#include "fpension/model.hpp"

namespace fpension {

/// Utility value with an explicit out-of-domain marker. Power fields are
/// minus infinity below their floor; that case is carried as a flag so a
/// single bad path cannot slip into an average as an ordinary number.
struct Utility {
    double value = 0.0;
    bool in_domain = true;

    static Utility out_of_domain() { return {0.0, false}; }
};

/// A forward utility at one instant: the family, the coefficients at that
/// time and the realized auxiliary states.
///   ratio power:  z = X^{pihat,0}_t, v = V_t
///   ratio exp:    z = X^{pihat,0}_t, gamma_t = Gamma_t, v = V_t
///   wealth power: z = W^{pitilde,0}_t, v = V_t
///   wealth exp:   z = W^{pitilde,0}_t, gamma_t = Gamma tilde_t, v = V_t
/// `salary` is the salary level Y_t, only used by the wealth families.
struct UtilityField {
    Family family = Family::PowerRatio;
    Coefficients c;
    PreferenceCoefficients pc;
    double z = 0.0;
    double gamma_t = 0.0;
    double v = 0.0;
    double salary = 1.0;
};

UtilityField make_field(const ModelParams& params, const PreferenceSpec& pref, double t, double z, double gamma_t,
                        double v, double salary = 1.0);

/// Initial field: z = 0, gamma_t = 1/gamma, v = 0, salary = y0.
UtilityField initial_field(const ModelParams& params, const PreferenceSpec& pref);

// Drifts of V (power: v_t; exponential: the dt coefficient of dV).
double power_v_drift(const Coefficients& c, const PreferenceCoefficients& pc);
double exp_V_drift(const Coefficients& c, const PreferenceCoefficients& pc);
double powerW_v_drift(const Coefficients& c, const PreferenceCoefficients& pc);
double expW_V_drift(const Coefficients& c, const PreferenceCoefficients& pc);
double V_drift(Family f, const Coefficients& c, const PreferenceCoefficients& pc);

double power_v_drift(const ModelParams& params, const PreferenceSpec& pref, double t);
double exp_V_drift(const ModelParams& params, const PreferenceSpec& pref, double t);

Utility evaluate_utility(const UtilityField& field, double x);

struct UtilityDerivatives {
    double u = 0.0;
    double ux = 0.0;
    double uxx = 0.0;
};

/// Value and first two x-derivatives. Throws DomainError outside the domain.
UtilityDerivatives utility_derivatives(const UtilityField& field, double x);

struct VolatilityFields {
    Vec a1;   // n
    Vec a2;   // m
    Vec da1;  // d a1 / dx
    Vec da2;  // d a2 / dx
};

/// Throws DomainError for power fields at or below the floor.
VolatilityFields volatility_fields(const UtilityField& field, double x);

/// Translation data of the drift identity.
struct SpdeContext {
    double z = 0.0;
    double nu = 0.0;
    Vec kappa1;
    Vec kappa2;
};

/// The translation each family is verified with (zero for exponential fields).
SpdeContext canonical_context(const UtilityField& field);

/// Drift b(x_tilde, t) forced on the translated field by the optimality
/// principle, from the analytic derivatives of the field and its volatility.
/// Throws DegenerateError if the field is not strictly concave at the point.
double spde_drift(const UtilityField& field, double x_tilde, const SpdeContext& ctx);

/// Optimal weights read off the translated field at x = x_tilde + z.
Vec spde_policy(const UtilityField& field, double x_tilde, const SpdeContext& ctx);

/// Direct Ito drift of t -> U(x_tilde + z_t, t) at fixed x_tilde under the
/// canonical translation (z_t the floor for power fields, zero for
/// exponential fields), computed from the dynamics of the auxiliary states.
/// Independent of spde_drift; used as its oracle.
double ito_drift(const UtilityField& field, double x_tilde);

}  // namespace fpension
