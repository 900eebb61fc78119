#include "fpension/preferences.hpp"

#include <cmath>

#include "fpension/io.hpp"

namespace fpension {

namespace {

Vec baseline_exposure(const Coefficients& c, const PreferenceCoefficients& pc) {
    // Sigma^T pitilde: the B1 loading of the wealth baseline.
    return c.sigma.transpose() * pc.pitilde;
}

void require_positive_scale(const UtilityField& f) {
    if (!(f.gamma_t > 0.0)) {
        throw DomainError("exponential field needs a positive risk tolerance process");
    }
}

}  // namespace

UtilityField make_field(const ModelParams& params, const PreferenceSpec& pref, double t, double z, double gamma_t,
                        double v, double salary) {
    UtilityField f;
    f.family = pref.family;
    f.c = coefficients_at(params, t);
    f.pc = preference_at(pref, t);
    f.z = z;
    f.gamma_t = gamma_t;
    f.v = v;
    f.salary = salary;
    return f;
}

UtilityField initial_field(const ModelParams& params, const PreferenceSpec& pref) {
    return make_field(params, pref, 0.0, 0.0, 1.0 / pref.gamma, 0.0, params.y0);
}

double power_v_drift(const Coefficients& c, const PreferenceCoefficients& pc) {
    const double g = pc.gamma;
    const double vol = c.sigmaY1.squaredNorm() + c.sigmaY2.squaredNorm();
    const double myopic = (c.lambda - g * c.sigmaY1 + pc.theta1).squaredNorm();
    return -g * (1.0 + g) / 2.0 * vol - g * myopic / (2.0 * (1.0 - g)) +
           g * (pc.theta1.dot(c.sigmaY1) + pc.theta2.dot(c.sigmaY2) + c.muY) -
           (pc.theta1.squaredNorm() + pc.theta2.squaredNorm()) / 2.0;
}

double exp_V_drift(const Coefficients& c, const PreferenceCoefficients& pc) {
    const Vec eta = c.lambda - c.sigmaY1 + pc.theta1 - pc.beta;
    return 0.5 * (eta.squaredNorm() - pc.theta1.squaredNorm() - pc.theta2.squaredNorm());
}

double powerW_v_drift(const Coefficients& c, const PreferenceCoefficients& pc) {
    const double g = pc.gamma;
    return -c.r * g - g * (c.lambda + pc.theta1).squaredNorm() / (2.0 * (1.0 - g)) -
           0.5 * (pc.theta1.squaredNorm() + pc.theta2.squaredNorm());
}

double expW_V_drift(const Coefficients& c, const PreferenceCoefficients& pc) {
    const Vec eta = c.lambda + pc.theta1 - baseline_exposure(c, pc);
    return 0.5 * (eta.squaredNorm() - pc.theta1.squaredNorm() - pc.theta2.squaredNorm());
}

double V_drift(Family f, const Coefficients& c, const PreferenceCoefficients& pc) {
    switch (f) {
        case Family::PowerRatio: return power_v_drift(c, pc);
        case Family::ExpRatio: return exp_V_drift(c, pc);
        case Family::PowerWealth: return powerW_v_drift(c, pc);
        case Family::ExpWealth: return expW_V_drift(c, pc);
    }
    return 0.0;
}

double power_v_drift(const ModelParams& params, const PreferenceSpec& pref, double t) {
    return power_v_drift(coefficients_at(params, t), preference_at(pref, t));
}

double exp_V_drift(const ModelParams& params, const PreferenceSpec& pref, double t) {
    return exp_V_drift(coefficients_at(params, t), preference_at(pref, t));
}

Utility evaluate_utility(const UtilityField& f, double x) {
    const double g = f.pc.gamma;
    if (is_power(f.family)) {
        const double xt = x - f.z;
        if (!(xt > 0.0)) return Utility::out_of_domain();
        return {std::pow(xt, g) * std::exp(f.v) / g, true};
    }
    require_positive_scale(f);
    return {-std::exp(-(x - f.z) / f.gamma_t + f.v), true};
}

UtilityDerivatives utility_derivatives(const UtilityField& f, double x) {
    const double g = f.pc.gamma;
    UtilityDerivatives d;
    if (is_power(f.family)) {
        const double xt = x - f.z;
        if (!(xt > 0.0)) {
            throw DomainError("power field evaluated at or below its floor (x - z = " + format_double(xt) + ")");
        }
        const double ev = std::exp(f.v);
        d.u = std::pow(xt, g) * ev / g;
        d.ux = std::pow(xt, g - 1.0) * ev;
        d.uxx = (g - 1.0) * std::pow(xt, g - 2.0) * ev;
        return d;
    }
    require_positive_scale(f);
    d.u = -std::exp(-(x - f.z) / f.gamma_t + f.v);
    d.ux = -d.u / f.gamma_t;
    d.uxx = d.u / (f.gamma_t * f.gamma_t);
    return d;
}

VolatilityFields volatility_fields(const UtilityField& f, double x) {
    const UtilityDerivatives d = utility_derivatives(f, x);
    const auto& pc = f.pc;
    VolatilityFields out;
    switch (f.family) {
        case Family::PowerRatio:
        case Family::PowerWealth:
            out.a1 = d.u * pc.theta1;
            out.a2 = d.u * pc.theta2;
            out.da1 = d.ux * pc.theta1;
            out.da2 = d.ux * pc.theta2;
            break;
        case Family::ExpRatio: {
            const double q = x / f.gamma_t;
            const Vec k1 = pc.theta1 + q * pc.beta;
            const Vec k2 = pc.theta2 - q * f.c.sigmaY2;
            out.a1 = d.u * k1;
            out.a2 = d.u * k2;
            out.da1 = d.ux * k1 + d.u * pc.beta / f.gamma_t;
            out.da2 = d.ux * k2 - d.u * f.c.sigmaY2 / f.gamma_t;
            break;
        }
        case Family::ExpWealth: {
            const Vec s = baseline_exposure(f.c, pc);
            const double q = x / f.gamma_t;
            const Vec k1 = pc.theta1 + q * s;
            out.a1 = d.u * k1;
            out.a2 = d.u * pc.theta2;
            out.da1 = d.ux * k1 + d.u * s / f.gamma_t;
            out.da2 = d.ux * pc.theta2;
            break;
        }
    }
    return out;
}

SpdeContext canonical_context(const UtilityField& f) {
    SpdeContext ctx;
    const auto n = f.c.mu.size();
    const auto m = f.c.sigmaY2.size();
    ctx.kappa1 = Vec::Zero(n);
    ctx.kappa2 = Vec::Zero(m);
    if (f.family == Family::PowerRatio) {
        ctx.z = f.z;
        ctx.nu = f.c.p + f.z * alpha_from_beta(f.c, f.pc.beta);
        ctx.kappa1 = f.z * f.pc.beta;
        ctx.kappa2 = -f.z * f.c.sigmaY2;
    } else if (f.family == Family::PowerWealth) {
        const double rho = f.c.r + f.pc.pitilde.dot(f.c.mu);
        ctx.z = f.z;
        ctx.nu = f.c.p * f.salary + f.z * rho;
        ctx.kappa1 = f.z * baseline_exposure(f.c, f.pc);
    }
    return ctx;
}

double spde_drift(const UtilityField& f, double x_tilde, const SpdeContext& ctx) {
    const double x = x_tilde + ctx.z;
    const UtilityDerivatives d = utility_derivatives(f, x);
    if (!(d.uxx < 0.0)) {
        throw DegenerateError("translated field is not strictly concave at x = " + format_double(x));
    }
    const VolatilityFields a = volatility_fields(f, x);
    const Coefficients& c = f.c;
    if (!is_wealth(f.family)) {
        const Vec k2 = x * c.sigmaY2 + ctx.kappa2;
        const Vec lam = c.lambda - c.sigmaY1;
        const double transport =
            c.p - ctx.nu + lam.dot(ctx.kappa1) + x * (c.lambda.dot(c.sigmaY1) + c.sigmaY2.squaredNorm() - c.muY);
        return -0.5 * k2.squaredNorm() * d.uxx + k2.dot(a.da2) - d.ux * transport +
               (a.da1 + lam * d.ux).squaredNorm() / (2.0 * d.uxx);
    }
    const double transport = c.p * f.salary - ctx.nu + x * c.r + c.lambda.dot(ctx.kappa1);
    return -d.ux * transport - 0.5 * d.uxx * ctx.kappa2.squaredNorm() + ctx.kappa2.dot(a.da2) +
           (a.da1 + c.lambda * d.ux).squaredNorm() / (2.0 * d.uxx);
}

Vec spde_policy(const UtilityField& f, double x_tilde, const SpdeContext& ctx) {
    const double x = x_tilde + ctx.z;
    if (x == 0.0) throw DomainError("optimal weights are undefined at zero fund value");
    const UtilityDerivatives d = utility_derivatives(f, x);
    if (!(d.uxx < 0.0)) {
        throw DegenerateError("translated field is not strictly concave at x = " + format_double(x));
    }
    const VolatilityFields a = volatility_fields(f, x);
    const Coefficients& c = f.c;
    if (!is_wealth(f.family)) {
        const Vec num = a.da1 + (c.lambda - c.sigmaY1) * d.ux - ctx.kappa1 * d.uxx;
        return c.sigma_t_inv * (c.sigmaY1 - num / (x * d.uxx));
    }
    return c.sigma_t_inv * (ctx.kappa1 - (a.da1 + c.lambda * d.ux) / d.uxx) / x;
}

double ito_drift(const UtilityField& f, double x_tilde) {
    const auto& c = f.c;
    const auto& pc = f.pc;
    const double theta_sq = pc.theta1.squaredNorm() + pc.theta2.squaredNorm();
    switch (f.family) {
        case Family::PowerRatio:
        case Family::PowerWealth: {
            const Utility u = evaluate_utility(f, x_tilde + f.z);
            if (!u.in_domain) throw DomainError("power field evaluated at or below its floor");
            return u.value * (V_drift(f.family, c, pc) + 0.5 * theta_sq);
        }
        case Family::ExpRatio: {
            require_positive_scale(f);
            const double x = x_tilde;
            const double u = evaluate_utility(f, x).value;
            const double q = x / f.gamma_t;
            const double b2 = pc.beta.squaredNorm();
            const double s2 = c.sigmaY2.squaredNorm();
            const Vec eta = c.lambda - c.sigmaY1 + pc.theta1 - pc.beta;
            const double rate = 0.5 * eta.squaredNorm() + c.p / f.gamma_t +
                                q * (pc.beta.dot(pc.theta1) - c.sigmaY2.dot(pc.theta2)) +
                                q * (alpha_from_beta(c, pc.beta) - b2 - s2) + 0.5 * q * q * (b2 + s2);
            return u * rate;
        }
        case Family::ExpWealth: {
            require_positive_scale(f);
            const double w = x_tilde;
            const double u = evaluate_utility(f, w).value;
            const double q = w / f.gamma_t;
            const Vec s = baseline_exposure(c, pc);
            const double rho = c.r + pc.pitilde.dot(c.mu);
            const double rate = 0.5 * (c.lambda + pc.theta1 - s).squaredNorm() + c.p * f.salary / f.gamma_t +
                                q * (rho - s.squaredNorm() + s.dot(pc.theta1)) + 0.5 * q * q * s.squaredNorm();
            return u * rate;
        }
    }
    return 0.0;
}

}  // namespace fpension
