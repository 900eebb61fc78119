#include <doctest.h>

#include <cmath>

#include "fpension/errors.hpp"
#include "fpension/preferences.hpp"
#include "fpension/strategies.hpp"
#include "oracles.hpp"

using namespace fpension;

namespace {

ModelParams scalar_params() {
    ModelParams p;
    p.r = 0.03;
    p.mu = Schedule<Vec>(Vec::Constant(1, 0.08));
    p.Sigma = Schedule<Mat>(Mat::Constant(1, 1, 0.2));
    p.muY = Schedule<double>(0.02);
    p.sigmaY1 = Schedule<Vec>(Vec::Constant(1, 0.08));
    p.sigmaY2 = Schedule<Vec>(Vec::Constant(1, 0.05));
    p.p = Schedule<double>(0.10);
    return p;
}

PreferenceSpec pref_of(Family f) {
    PreferenceSpec s;
    s.family = f;
    s.gamma = 0.6;
    s.theta1 = Schedule<Vec>(Vec::Zero(1));
    s.theta2 = Schedule<Vec>(Vec::Constant(1, 0.2));
    s.beta = Schedule<Vec>(Vec::Constant(1, 0.25));
    s.pitilde = Schedule<Vec>(Vec::Constant(1, 0.3));
    return s;
}

const Family kAll[] = {Family::PowerRatio, Family::ExpRatio, Family::PowerWealth, Family::ExpWealth};

}  // namespace

TEST_CASE("drift of V by hand for the scalar market") {
    const auto p = scalar_params();
    // -0.48 * 0.0089 - 0.6 * 0.352^2 / 0.8 + 0.6 * 0.03 - 0.02
    CHECK(power_v_drift(p, pref_of(Family::PowerRatio), 0.0) == doctest::Approx(-0.0992).epsilon(1e-12));
    // ((0.32 - 0.25)^2 - 0.04) / 2
    CHECK(exp_V_drift(p, pref_of(Family::ExpRatio), 0.0) == doctest::Approx(-0.01755).epsilon(1e-12));
    const auto c = coefficients_at(p, 0.0);
    const auto pc = preference_at(pref_of(Family::PowerWealth), 0.0);
    // -r gamma - gamma lambda^2 / (2 (1 - gamma)) - theta2^2 / 2
    CHECK(powerW_v_drift(c, pc) == doctest::Approx(-0.018 - 0.6 * 0.16 / 0.8 - 0.02).epsilon(1e-12));
    // ((lambda - sigma pitilde)^2 - theta2^2) / 2
    CHECK(expW_V_drift(c, pc) == doctest::Approx(0.5 * (0.34 * 0.34 - 0.04)).epsilon(1e-12));
    CHECK(V_drift(Family::PowerRatio, c, pc) == power_v_drift(c, pc));
    CHECK(V_drift(Family::ExpRatio, c, pc) == exp_V_drift(c, pc));
    CHECK(V_drift(Family::PowerWealth, c, pc) == powerW_v_drift(c, pc));
    CHECK(V_drift(Family::ExpWealth, c, pc) == expW_V_drift(c, pc));
}

TEST_CASE("initial utilities") {
    const auto p = scalar_params();
    const auto power = initial_field(p, pref_of(Family::PowerRatio));
    CHECK(evaluate_utility(power, 1.0).value == doctest::Approx(1.0 / 0.6).epsilon(1e-15));
    const auto exp = initial_field(p, pref_of(Family::ExpRatio));
    CHECK(evaluate_utility(exp, 1.0).value == doctest::Approx(-std::exp(-0.6)).epsilon(1e-15));
    CHECK(evaluate_utility(power, 0.0).in_domain == false);
    CHECK(evaluate_utility(power, -1.0).in_domain == false);
}

TEST_CASE("analytic derivatives match finite differences") {
    const auto p = scalar_params();
    for (Family f : kAll) {
        CAPTURE(to_string(f));
        const auto field = make_field(p, pref_of(f), 2.0, 0.4, 1.3, -0.2, 1.1);
        const double x = 1.7;
        const auto d = utility_derivatives(field, x);
        auto U = [&](double y) { return evaluate_utility(field, y).value; };
        CHECK(d.u == doctest::Approx(U(x)).epsilon(1e-14));
        CHECK(d.ux == doctest::Approx(oracle::d1(U, x)).epsilon(1e-7));
        CHECK(d.uxx == doctest::Approx(oracle::d2(U, x)).epsilon(1e-5));
        CHECK(d.uxx < 0.0);
    }
    const auto power = make_field(p, pref_of(Family::PowerRatio), 0.0, 0.5, 1.0, 0.0);
    CHECK_THROWS_AS(utility_derivatives(power, 0.5), DomainError);
    CHECK_THROWS_AS(volatility_fields(power, 0.3), DomainError);
}

TEST_CASE("volatility field derivatives match finite differences") {
    const auto p = scalar_params();
    for (Family f : kAll) {
        CAPTURE(to_string(f));
        const auto field = make_field(p, pref_of(f), 1.0, 0.3, 0.9, 0.1, 1.2);
        const double x = 2.1;
        const auto v = volatility_fields(field, x);
        auto a1 = [&](double y) { return volatility_fields(field, y).a1(0); };
        auto a2 = [&](double y) { return volatility_fields(field, y).a2(0); };
        CHECK(v.da1(0) == doctest::Approx(oracle::d1(a1, x)).epsilon(1e-7));
        CHECK(v.da2(0) == doctest::Approx(oracle::d1(a2, x)).epsilon(1e-7));
    }
    // Power fields: the volatility is U theta, e.g. U * 0.2 on the second factor.
    const auto field = make_field(p, pref_of(Family::PowerRatio), 0.0, 0.0, 1.0, 0.0);
    CHECK(volatility_fields(field, 1.0).a2(0) == doctest::Approx(0.2 / 0.6).epsilon(1e-14));
}

TEST_CASE("drift identity and policy read-off on the scalar market") {
    const auto p = scalar_params();
    for (Family f : kAll) {
        CAPTURE(to_string(f));
        const auto field = make_field(p, pref_of(f), 3.0, 0.6, 1.4, -0.3, 1.2);
        const auto ctx = canonical_context(field);
        for (double xt : {0.2, 1.0, 4.0}) {
            const double u = evaluate_utility(field, xt + ctx.z).value;
            CHECK(std::abs(spde_drift(field, xt, ctx) - ito_drift(field, xt)) < 1e-12 * std::abs(u) + 1e-15);
        }
        const double x = 1.0 + ctx.z;
        Vec closed;
        switch (f) {
            case Family::PowerRatio: closed = forward_power_policy(x, field.z, field.c, field.pc); break;
            case Family::ExpRatio: closed = forward_exp_policy(x, field.gamma_t, field.c, field.pc); break;
            case Family::PowerWealth: closed = forward_powerW_policy(x, field.z, field.c, field.pc); break;
            case Family::ExpWealth: closed = forward_expW_policy(x, field.gamma_t, field.c, field.pc); break;
        }
        CHECK((spde_policy(field, 1.0, ctx) - closed).norm() < 1e-12);
    }
}

TEST_CASE("power Ito drift equals U times (v + |theta|^2 / 2)") {
    const auto p = scalar_params();
    const auto field = make_field(p, pref_of(Family::PowerRatio), 0.0, 0.5, 1.0, 0.1);
    const double u = evaluate_utility(field, 2.5).value;
    CHECK(ito_drift(field, 2.0) == doctest::Approx(u * (-0.0992 + 0.02)).epsilon(1e-12));
}

TEST_CASE("preference validation names the key") {
    auto s = pref_of(Family::PowerRatio);
    s.gamma = 1.2;
    try {
        s.validate(1, 1);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.key() == "preference.gamma");
    }
    s = pref_of(Family::PowerRatio);
    s.beta = Schedule<Vec>(Vec::Zero(2));
    CHECK_THROWS_AS(s.validate(1, 1), ValidationError);
    auto e = pref_of(Family::ExpRatio);
    e.gamma = 2.5;
    CHECK_NOTHROW(e.validate(1, 1));
}
