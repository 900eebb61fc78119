#pragma once

// Market, salary and plan coefficients as piecewise-constant schedules in time
// (years), plus the preference parameter record shared by all modules.

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpension/errors.hpp"

namespace fpension {

/// Upper bound on the number of risky assets and of non-hedgeable noises.
/// Vectors and matrices live on the stack up to this size.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Grid times are computed in floating point; a time within this distance
/// below a breakpoint already belongs to the new regime.
inline constexpr double kBreakpointTolerance = 1e-9;

/// Matrices with a 2-norm condition number above this are rejected.
inline constexpr double kMaxConditionNumber = 1e12;

inline bool same_value(double a, double b) { return a == b; }

template <class A, class B>
bool same_value(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

/// Right-continuous piecewise-constant function of time on [0, inf).
template <class V>
class Schedule {
public:
    Schedule() : breakpoints_{0.0}, values_(1) {}

    Schedule(V constant) : breakpoints_{0.0}, values_{std::move(constant)} {}

    Schedule(std::vector<double> breakpoints, std::vector<V> values)
        : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
        if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
            throw DomainError("schedule needs one value per breakpoint");
        }
        if (breakpoints_.front() != 0.0) {
            throw DomainError("schedule must start at t = 0");
        }
        for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
            if (!(breakpoints_[i] > breakpoints_[i - 1])) {
                throw DomainError("schedule breakpoints must be strictly increasing");
            }
        }
    }

    const V& at(double t) const {
        if (t < -kBreakpointTolerance) {
            throw DomainError("schedule evaluated at negative time");
        }
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t + kBreakpointTolerance);
        return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
    }

    std::span<const double> breakpoints() const { return breakpoints_; }
    std::span<const V> values() const { return values_; }

    /// Same schedule on [0, t), constant `value` on [t, inf).
    Schedule switched_at(double t, V value) const {
        std::vector<double> bps;
        std::vector<V> vals;
        for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
            if (breakpoints_[i] < t - kBreakpointTolerance) {
                bps.push_back(breakpoints_[i]);
                vals.push_back(values_[i]);
            }
        }
        if (bps.empty()) {
            return Schedule(std::move(value));
        }
        if (same_value(vals.back(), value)) {
            return Schedule(std::move(bps), std::move(vals));  // no actual change
        }
        bps.push_back(t);
        vals.push_back(std::move(value));
        return Schedule(std::move(bps), std::move(vals));
    }

private:
    std::vector<double> breakpoints_;
    std::vector<V> values_;
};

struct ModelParams {
    int n = 1;
    int m = 1;
    double r = 0.0;
    Schedule<Vec> mu;
    Schedule<Mat> Sigma;
    Schedule<double> muY;
    Schedule<Vec> sigmaY1;
    Schedule<Vec> sigmaY2;
    Schedule<double> p;
    double w0 = 1.0;
    double y0 = 1.0;

    double x0() const { return w0 / y0; }

    /// Throws ValidationError naming the first offending field.
    void validate() const;

    /// Union of all schedule breakpoints, sorted and de-duplicated.
    std::vector<double> breakpoints() const;
};

/// Everything the dynamics need at one instant, with the inverses precomputed.
struct Coefficients {
    double r = 0.0;
    Vec mu;
    Mat sigma;
    Mat sigma_t_inv;  // (Sigma^T)^{-1}
    Vec lambda;       // Sigma^{-1} mu
    double muY = 0.0;
    Vec sigmaY1;
    Vec sigmaY2;
    double p = 0.0;
};

Coefficients coefficients_at(const ModelParams& params, double t);

/// lambda_t = Sigma_t^{-1} mu_t.
Vec market_price_of_risk(const ModelParams& params, double t);

/// Drift alpha of the baseline ratio implied by its hedgeable sensitivity beta.
double alpha_from_beta(const Coefficients& c, const Vec& beta);
double alpha_from_beta(const ModelParams& params, const Vec& beta, double t);

/// Throws SingularMatrixError when `m` is singular or worse conditioned than
/// kMaxConditionNumber.
void check_conditioning(const Mat& m, std::string_view what);

enum class Family { PowerRatio, ExpRatio, PowerWealth, ExpWealth };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

inline bool is_power(Family f) { return f == Family::PowerRatio || f == Family::PowerWealth; }
inline bool is_wealth(Family f) { return f == Family::PowerWealth || f == Family::ExpWealth; }

struct PreferenceSpec {
    Family family = Family::PowerRatio;
    double gamma = 0.5;
    Schedule<Vec> theta1;  // n-vectors
    Schedule<Vec> theta2;  // m-vectors
    Schedule<Vec> beta;    // baseline sensitivity, ratio families
    Schedule<Vec> pitilde; // baseline strategy, wealth families

    void validate(int n, int m) const;
};

struct PreferenceCoefficients {
    double gamma = 0.5;
    Vec theta1;
    Vec theta2;
    Vec beta;
    Vec pitilde;
};

PreferenceCoefficients preference_at(const PreferenceSpec& pref, double t);

}  // namespace fpension
