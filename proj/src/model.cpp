#include "fpension/model.hpp"

#include <cmath>
#include <set>

namespace fpension {

namespace {

template <class V, class Pred>
void require_all(const Schedule<V>& s, const std::string& key, Pred&& ok, const std::string& what) {
    for (const auto& v : s.values()) {
        if (!ok(v)) {
            throw ValidationError(key, what);
        }
    }
}

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

void check_conditioning(const Mat& m, std::string_view what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw SingularMatrixError(std::string(what) + " is not a non-empty square matrix");
    }
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0) || !std::isfinite(smax) || smax / smin > kMaxConditionNumber) {
        throw SingularMatrixError(std::string(what) + " is singular or ill-conditioned");
    }
}

void ModelParams::validate() const {
    if (n < 1 || n > kMaxDim) {
        throw ValidationError("market.n", "must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (m < 1 || m > kMaxDim) {
        throw ValidationError("salary.m", "must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (!std::isfinite(r)) {
        throw ValidationError("market.r", "must be finite");
    }
    require_all(mu, "market.mu", [&](const Vec& v) { return v.size() == n && finite(v); },
                "expected a finite vector of length n");
    require_all(Sigma, "market.sigma",
                [&](const Mat& s) { return s.rows() == n && s.cols() == n && s.allFinite(); },
                "expected a finite n x n matrix");
    for (const auto& s : Sigma.values()) {
        try {
            check_conditioning(s, "market.sigma");
        } catch (const SingularMatrixError& e) {
            throw ValidationError("market.sigma", e.what());
        }
    }
    require_all(muY, "salary.muY", [](double v) { return std::isfinite(v); }, "must be finite");
    require_all(sigmaY1, "salary.sigmaY1", [&](const Vec& v) { return v.size() == n && finite(v); },
                "expected a finite vector of length n");
    require_all(sigmaY2, "salary.sigmaY2", [&](const Vec& v) { return v.size() == m && finite(v); },
                "expected a finite vector of length m");
    require_all(p, "plan.p", [](double v) { return std::isfinite(v) && v >= 0.0; },
                "must be finite and non-negative");
    if (!(w0 > 0.0) || !std::isfinite(w0)) {
        throw ValidationError("plan.w0", "must be positive");
    }
    if (!(y0 > 0.0) || !std::isfinite(y0)) {
        throw ValidationError("salary.y0", "must be positive");
    }
}

std::vector<double> ModelParams::breakpoints() const {
    std::set<double> all;
    auto add = [&](std::span<const double> bps) { all.insert(bps.begin(), bps.end()); };
    add(mu.breakpoints());
    add(Sigma.breakpoints());
    add(muY.breakpoints());
    add(sigmaY1.breakpoints());
    add(sigmaY2.breakpoints());
    add(p.breakpoints());
    return {all.begin(), all.end()};
}

Coefficients coefficients_at(const ModelParams& params, double t) {
    Coefficients c;
    c.r = params.r;
    c.mu = params.mu.at(t);
    c.sigma = params.Sigma.at(t);
    check_conditioning(c.sigma, "Sigma");
    c.sigma_t_inv = c.sigma.transpose().inverse();
    c.lambda = c.sigma.partialPivLu().solve(c.mu);
    c.muY = params.muY.at(t);
    c.sigmaY1 = params.sigmaY1.at(t);
    c.sigmaY2 = params.sigmaY2.at(t);
    c.p = params.p.at(t);
    return c;
}

Vec market_price_of_risk(const ModelParams& params, double t) {
    const Mat& sigma = params.Sigma.at(t);
    check_conditioning(sigma, "Sigma");
    return sigma.partialPivLu().solve(params.mu.at(t));
}

double alpha_from_beta(const Coefficients& c, const Vec& beta) {
    return (c.lambda - c.sigmaY1).dot(beta) + c.lambda.dot(c.sigmaY1) + c.sigmaY2.squaredNorm() - c.muY;
}

double alpha_from_beta(const ModelParams& params, const Vec& beta, double t) {
    return alpha_from_beta(coefficients_at(params, t), beta);
}

std::string_view to_string(Family f) {
    switch (f) {
        case Family::PowerRatio: return "power";
        case Family::ExpRatio: return "exp";
        case Family::PowerWealth: return "powerW";
        case Family::ExpWealth: return "expW";
    }
    return "?";
}

Family family_from_string(std::string_view s) {
    if (s == "power") return Family::PowerRatio;
    if (s == "exp") return Family::ExpRatio;
    if (s == "powerW") return Family::PowerWealth;
    if (s == "expW") return Family::ExpWealth;
    throw ValidationError("preference.family", "unknown family '" + std::string(s) +
                                                   "' (expected power, exp, powerW or expW)");
}

void PreferenceSpec::validate(int n, int m) const {
    if (!std::isfinite(gamma)) {
        throw ValidationError("preference.gamma", "must be finite");
    }
    if (is_power(family) && !(gamma > 0.0 && gamma < 1.0)) {
        throw ValidationError("preference.gamma", "power families need 0 < gamma < 1");
    }
    if (!is_power(family) && !(gamma > 0.0)) {
        throw ValidationError("preference.gamma", "exponential families need gamma > 0");
    }
    auto vec_n = [&](const Vec& v) { return v.size() == n && v.allFinite(); };
    auto vec_m = [&](const Vec& v) { return v.size() == m && v.allFinite(); };
    require_all(theta1, "preference.theta1", vec_n, "expected a finite vector of length n");
    require_all(theta2, "preference.theta2", vec_m, "expected a finite vector of length m");
    if (is_wealth(family)) {
        require_all(pitilde, "preference.pitilde", vec_n, "expected a finite vector of length n");
    } else {
        require_all(beta, "preference.beta", vec_n, "expected a finite vector of length n");
    }
}

PreferenceCoefficients preference_at(const PreferenceSpec& pref, double t) {
    PreferenceCoefficients c;
    c.gamma = pref.gamma;
    c.theta1 = pref.theta1.at(t);
    c.theta2 = pref.theta2.at(t);
    c.beta = pref.beta.at(t);
    c.pitilde = pref.pitilde.at(t);
    return c;
}

}  // namespace fpension
