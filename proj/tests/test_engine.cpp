#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "fpension/engine.hpp"
#include "fpension/errors.hpp"
#include "fpension/io.hpp"
#include "fpension/noise.hpp"
#include "fpension/stats.hpp"
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

PreferenceSpec power_pref() {
    PreferenceSpec s;
    s.gamma = 0.6;
    s.theta1 = Schedule<Vec>(Vec::Zero(1));
    s.theta2 = Schedule<Vec>(Vec::Constant(1, 0.2));
    s.beta = Schedule<Vec>(Vec::Constant(1, 0.25));
    s.pitilde = Schedule<Vec>(Vec::Constant(1, 0.3));
    return s;
}

ModelParams quiet_params() {
    ModelParams p = scalar_params();
    p.r = 0.0;
    p.mu = Schedule<Vec>(Vec::Zero(1));
    p.muY = Schedule<double>(0.0);
    p.sigmaY1 = Schedule<Vec>(Vec::Zero(1));
    p.sigmaY2 = Schedule<Vec>(Vec::Zero(1));
    return p;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fpension_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("noise") {
    TEST_CASE("streams are reproducible and distinct") {
        const TimeGrid g(0.0, 1.0, 50);
        const auto a = generate_noise(7, 3, g, 2, 1);
        const auto b = generate_noise(7, 3, g, 2, 1);
        const auto c = generate_noise(7, 4, g, 2, 1);
        CHECK(a.dB1 == b.dB1);
        CHECK(a.dB2 == b.dB2);
        CHECK(a.dB1 != c.dB1);
        CHECK(path_stream_seed(7, 3) != path_stream_seed(7, 4));
    }

    TEST_CASE("increments have mean zero and variance dt") {
        const TimeGrid g(0.0, 1.0, 1000);
        const int paths = 1000;  // 10^6 hedgeable increments in total
        CompensatedSum s1, s2;
        for (int i = 0; i < paths; ++i) {
            const auto n = generate_noise(11, static_cast<std::uint64_t>(i), g, 1, 1);
            for (int k = 0; k < g.steps; ++k) {
                s1.add(n.dB1(k, 0));
                s2.add(n.dB1(k, 0) * n.dB1(k, 0));
            }
        }
        const double count = 1e6, dt = g.dt();
        const double mean = s1.value() / count;
        CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / count));
        const double var = s2.value() / count - mean * mean;
        CHECK(std::abs(var / dt - 1.0) < 0.01);
    }

    TEST_CASE("coarsening sums consecutive blocks") {
        const TimeGrid g(0.0, 1.0, 8);
        const auto fine = generate_noise(1, 0, g, 1, 1);
        const auto coarse = coarsen(fine, 4);
        REQUIRE(coarse.steps() == 2);
        CHECK(coarse.dB1(1, 0) == doctest::Approx(fine.dB1.block(4, 0, 4, 1).sum()).epsilon(1e-15));
        CHECK_THROWS(coarsen(fine, 3));
    }

    TEST_CASE("replay files round trip and are shape checked") {
        const TimeGrid g(0.0, 1.0, 12);
        const auto n = generate_noise(5, 2, g, 1, 1);
        const auto file = scratch("replay.csv");
        write_noise_csv(file, n);
        const auto back = read_noise_csv(file, 12, 1, 1);
        CHECK(back.dB1 == n.dB1);
        CHECK(back.dB2 == n.dB2);
        CHECK_THROWS_AS(read_noise_csv(file, 13, 1, 1), ValidationError);
        CHECK_THROWS_AS(read_noise_csv(file, 12, 2, 1), ValidationError);
    }

    TEST_CASE("grids locate points and breakpoints") {
        const TimeGrid g(0.0, 20.0, 20 * 252);
        CHECK(g.index_of(5.0) == 5 * 252);
        CHECK_THROWS_AS(g.index_of(5.001), DomainError);
        const double ok[] = {10.0};
        CHECK_NOTHROW(g.require_aligned(ok));
        const double bad[] = {10.0001};
        CHECK_THROWS_AS(g.require_aligned(bad), DomainError);
    }
}

TEST_SUITE("statistics") {
    TEST_CASE("compensated summation recovers cancelled digits") {
        CompensatedSum s;
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        CHECK(s.value() == 1.0);
    }

    TEST_CASE("summary statistics") {
        const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
        const auto s = summarize(v);
        CHECK(s.mean == 2.5);
        CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
        CHECK(s.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
        CHECK(fraction_above(v, 2.0) == 0.5);
        CHECK(fraction_below(v, 2.0) == 0.25);
        CHECK(empirical_cdf(std::vector<double>{3.0, 1.0, 2.0}) == std::vector<double>{1.0, 2.0, 3.0});
    }

    TEST_CASE("standard errors shrink like one over root n") {
        const TimeGrid g(0.0, 1.0, 1);
        auto se = [&](int n) {
            std::vector<double> v;
            for (int i = 0; i < n; ++i) v.push_back(generate_noise(3, static_cast<std::uint64_t>(i), g, 1, 1).dB1(0, 0));
            return summarize(v).stderr_;
        };
        const double ratio = se(4000) / se(16000);
        CHECK(std::abs(ratio / 2.0 - 1.0) < 0.2);
    }

    TEST_CASE("parallel loops cover every index and report the lowest failure") {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        for (int workers : {1, 3, 8}) {
            try {
                parallel_for(200, workers, [](std::size_t i) {
                    if (i % 37 == 5) throw std::runtime_error(std::to_string(i));
                });
                FAIL("expected an exception");
            } catch (const std::runtime_error& e) {
                CHECK(std::string(e.what()) == "5");
            }
        }
    }
}

TEST_SUITE("engine") {
    TEST_CASE("no noise, no drift, no contributions keeps the ratio fixed") {
        auto p = quiet_params();
        p.p = Schedule<double>(0.0);
        const TimeGrid g(0.0, 5.0, 100);
        const auto pol = make_constant_policy(Schedule<Vec>(Vec::Zero(1)));
        const auto b = simulate_ratio_path(p, pol, generate_noise(1, 0, g, 1, 1), g);
        for (double x : b.lanes.front().X) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("pure contributions accumulate linearly") {
        const auto p = quiet_params();
        const TimeGrid g(0.0, 5.0, 100);
        const auto pol = make_constant_policy(Schedule<Vec>(Vec::Zero(1)));
        const auto b = simulate_ratio_path(p, pol, generate_noise(1, 0, g, 1, 1), g);
        const auto& lane = b.lanes.front();
        for (std::size_t k = 0; k < lane.X.size(); ++k) {
            CHECK(lane.X[k] == doctest::Approx(1.0 + 0.1 * b.times[k]).epsilon(1e-12));
        }
    }

    TEST_CASE("deterministic baseline ratio matches a Runge-Kutta solution") {
        auto p = scalar_params();
        p.sigmaY2 = Schedule<Vec>(Vec::Zero(1));
        const Schedule<Vec> beta(Vec::Zero(1));
        const double alpha = alpha_from_beta(p, Vec::Zero(1), 0.0);
        const TimeGrid g(0.0, 10.0, 2520);
        const auto z = simulate_baseline_ratio(p, beta, generate_noise(9, 0, g, 1, 1), g, 0.0);
        const double ref = oracle::rk4([&](double, double y) { return 0.1 + alpha * y; }, 0.0, 0.0, 10.0, 10000);
        CHECK(std::abs(z.back() - ref) < 1e-6);
    }

    TEST_CASE("stochastic baseline ratio has the affine mean") {
        const auto p = scalar_params();
        const Schedule<Vec> beta(Vec::Constant(1, 0.25));
        const double alpha = alpha_from_beta(p, Vec::Constant(1, 0.25), 0.0);
        const TimeGrid g(0.0, 10.0, 500);
        std::vector<double> z10(4000);
        for (std::size_t i = 0; i < z10.size(); ++i) {
            z10[i] = simulate_baseline_ratio(p, beta, generate_noise(21, i, g, 1, 1), g, 0.0).back();
        }
        const auto s = summarize(z10);
        const double ref = oracle::rk4([&](double, double y) { return 0.1 + alpha * y; }, 0.0, 0.0, 10.0, 10000);
        CHECK(std::abs(s.mean - ref) <= 3.0 * s.stderr_);
    }

    TEST_CASE("zero start without contributions stays at zero") {
        const auto p = scalar_params();
        const TimeGrid g(0.0, 2.0, 40);
        const auto z = simulate_baseline_ratio(p, Schedule<Vec>(Vec::Constant(1, 0.3)), generate_noise(2, 0, g, 1, 1),
                                               g, 0.0, false);
        for (double v : z) CHECK(v == 0.0);
        CHECK_THROWS_AS(simulate_baseline_ratio(p, Schedule<Vec>(Vec::Zero(1)), generate_noise(2, 0, g, 1, 1), g, -1.0),
                        DomainError);
    }

    TEST_CASE("the power lane floor is the baseline ratio") {
        const auto p = scalar_params();
        const auto pref = power_pref();
        const TimeGrid g(0.0, 5.0, 250);
        const auto noise = generate_noise(4, 1, g, 1, 1);
        const auto b = simulate_ratio_path(p, make_forward_policy(pref, "f"), noise, g);
        const auto z = simulate_baseline_ratio(p, pref.beta, noise, g, 0.0);
        const auto& lane = b.lanes.front();
        for (std::size_t k = 0; k < z.size(); k += 25) CHECK(lane.Z[k] == doctest::Approx(z[k]).epsilon(1e-12));
        for (std::size_t k = 0; k < z.size(); ++k) {
            CHECK(lane.X[k] > lane.Z[k]);
            CHECK(lane.W[k] == doctest::Approx(lane.X[k] * lane.Y[k]).epsilon(1e-14));
        }
    }

    TEST_CASE("identical policies give identical series and shared noise") {
        const auto p = scalar_params();
        const TimeGrid g(0.0, 3.0, 90);
        const auto noise = generate_noise(8, 0, g, 1, 1);
        const auto pol = make_forward_policy(power_pref(), "a");
        auto pol2 = pol;
        pol2.id = "b";
        const auto b = simulate_joint(p, {pol, pol2}, noise, g);
        CHECK(b.lane("a").X == b.lane("b").X);
        CHECK(b.lane("a").V == b.lane("b").V);
        const auto other = simulate_ratio_path(p, make_baseline_policy(power_pref()), generate_noise(8, 1, g, 1, 1), g);
        const auto same = simulate_ratio_path(p, make_baseline_policy(power_pref()), noise, g);
        CHECK(other.lanes.front().X != same.lanes.front().X);
    }

    TEST_CASE("regime-switched forward lanes agree before the switch") {
        const auto base = scalar_params();
        auto sw = base;
        sw.muY = base.muY.switched_at(2.0, 0.07);
        const TimeGrid g(0.0, 4.0, 4 * 52);
        const std::vector<Lane> lanes{{"one", sw, make_forward_policy(power_pref(), "one")},
                                      {"two", base, make_forward_policy(power_pref(), "two")}};
        const auto b = simulate_joint(lanes, generate_noise(3, 0, g, 1, 1), g);
        const int k0 = g.index_of(2.0);
        for (int k = 0; k < k0; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            CHECK(std::abs(b.lane("one").pi[kk](0) - b.lane("two").pi[kk](0)) <= 1e-12);
        }
        CHECK(b.lane("one").pi.back()(0) != b.lane("two").pi.back()(0));
    }

    TEST_CASE("Euler-Maruyama converges strongly at order one half") {
        // Geometric case: p = 0, fixed weight, exact lognormal terminal value.
        auto p = scalar_params();
        p.p = Schedule<double>(0.0);
        const double w = 0.5;
        const auto pol = make_constant_policy(Schedule<Vec>(Vec::Constant(1, w)));
        const double b1 = 0.2 * w - 0.08, b2 = -0.05;
        const double a = w * 0.2 * (0.4 - 0.08) - 0.02 + 0.08 * 0.08 + 0.05 * 0.05;
        const double T = 2.0;
        const TimeGrid fine(0.0, T, 256);
        double err[2] = {0.0, 0.0};
        const int factors[2] = {8, 4};
        const int paths = 1500;
        for (int i = 0; i < paths; ++i) {
            const auto noise = generate_noise(17, static_cast<std::uint64_t>(i), fine, 1, 1);
            const double B1 = noise.dB1.sum(), B2 = noise.dB2.sum();
            const double exact = std::exp((a - 0.5 * (b1 * b1 + b2 * b2)) * T + b1 * B1 + b2 * B2);
            for (int l = 0; l < 2; ++l) {
                const TimeGrid g(0.0, T, 256 / factors[l]);
                const double x = simulate_ratio_path(p, pol, coarsen(noise, factors[l]), g).lanes.front().X.back();
                err[l] += (x - exact) * (x - exact);
            }
        }
        const double order = std::log(std::sqrt(err[0] / err[1])) / std::log(2.0);
        CHECK(order == doctest::Approx(0.5).epsilon(0.3));
    }

    TEST_CASE("wealth lanes report the ratio and keep the cushion positive") {
        const auto p = scalar_params();
        auto pref = power_pref();
        pref.family = Family::PowerWealth;
        const TimeGrid g(0.0, 5.0, 250);
        const auto b = simulate_ratio_path(p, make_forward_policy(pref, "w"), generate_noise(6, 0, g, 1, 1), g);
        const auto& lane = b.lanes.front();
        for (std::size_t k = 0; k < lane.W.size(); ++k) {
            CHECK(lane.X[k] == doctest::Approx(lane.W[k] / lane.Y[k]).epsilon(1e-14));
            CHECK(lane.W[k] > lane.Z[k]);
        }
    }

    TEST_CASE("direct wealth integration tracks the ratio path") {
        const auto p = scalar_params();
        const auto pol = make_constant_policy(Schedule<Vec>(Vec::Constant(1, 0.5)));
        const TimeGrid g(0.0, 1.0, 1000);
        const auto noise = generate_noise(2, 0, g, 1, 1);
        const auto direct = simulate_wealth_direct(p, pol, noise, g);
        const auto ratio = simulate_ratio_path(p, pol, noise, g);
        CHECK(direct.X.back() == doctest::Approx(ratio.lanes.front().X.back()).epsilon(1e-2));
        CHECK(direct.Y.back() == doctest::Approx(ratio.lanes.front().Y.back()).epsilon(1e-13));
        CHECK_THROWS_AS(simulate_wealth_direct(p, make_forward_policy(power_pref(), "f"), noise, g), DomainError);
    }

    TEST_CASE("non-finite states raise a blow-up error") {
        auto p = scalar_params();
        p.p = Schedule<double>(0.0);
        const auto pol = make_constant_policy(Schedule<Vec>(Vec::Constant(1, 1e200)));
        const TimeGrid g(0.0, 1.0, 10);
        CHECK_THROWS_AS(simulate_ratio_path(p, pol, generate_noise(1, 0, g, 1, 1), g), BlowUpError);
    }

    TEST_CASE("mismatched noise is refused") {
        const auto p = scalar_params();
        const TimeGrid g(0.0, 1.0, 10);
        const auto pol = make_baseline_policy(power_pref());
        CHECK_THROWS_AS(simulate_ratio_path(p, pol, generate_noise(1, 0, TimeGrid(0.0, 1.0, 11), 1, 1), g),
                        DomainError);
        CHECK_THROWS_AS(simulate_ratio_path(p, pol, generate_noise(1, 0, g, 2, 1), g), DomainError);
    }

    TEST_CASE("trajectory files have the documented columns") {
        const auto p = scalar_params();
        const TimeGrid g(0.0, 1.0, 4);
        const auto b = simulate_ratio_path(p, make_forward_policy(power_pref(), "f"), generate_noise(1, 0, g, 1, 1), g);
        const auto file = scratch("traj.csv");
        write_trajectory_csv(file, b, "f");
        const auto t = read_csv(file);
        CHECK(t.header == std::vector<std::string>{"t", "Y", "W", "X", "Z", "Gamma", "V", "pi_1"});
        CHECK(t.rows.size() == 5);
    }
}
