#include "fpension/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fpension/io.hpp"
#include "fpension/preferences.hpp"

namespace fpension {

namespace {

enum class Scheme { Euler, PowerCushion, ExpQuotient, PowerWealthCushion, ExpWealthQuotient };

Scheme scheme_for(PolicyKind k) {
    switch (k) {
        case PolicyKind::ForwardPower: return Scheme::PowerCushion;
        case PolicyKind::ForwardExp: return Scheme::ExpQuotient;
        case PolicyKind::ForwardPowerWealth: return Scheme::PowerWealthCushion;
        case PolicyKind::ForwardExpWealth: return Scheme::ExpWealthQuotient;
        default: return Scheme::Euler;
    }
}

bool is_wealth_scheme(Scheme s) { return s == Scheme::PowerWealthCushion || s == Scheme::ExpWealthQuotient; }

// Everything a lane needs on a run of grid points with constant coefficients.
struct Segment {
    int k_begin = 0;  // first grid point of the run
    int k_end = 0;    // one past the last grid point
    Coefficients c;
    PreferenceCoefficients pc;
    double y_log_drift = 0.0;
    // ratio Euler
    double ratio_drift_base = 0.0;  // -muY + |sigmaY1|^2 + |sigmaY2|^2
    Vec lam_minus_s1;
    // floors and Gamma: exact step exp(floor_log_drift dt + floor_vol1.dB1 + floor_vol2.dB2)
    double floor_log_drift = 0.0;
    Vec floor_vol1;
    Vec floor_vol2;
    // Contributions enter the floor step as p * integral_0^dt exp(contrib_rate s) ds,
    // which keeps the conditional mean of the floor exact.
    double contrib_rate = 0.0;
    double contrib_dt = 0.0;
    // V
    double v_drift = 0.0;
    // cushion (log) or quotient (arithmetic) step of X or W
    double x_drift = 0.0;
    Vec x_vol1;
    Vec x_vol2;
    Vec baseline;
    Vec target;
};

struct LaneState {
    double y = 0.0, w = 0.0, x = 0.0, z = 0.0, gamma = 0.0, v = 0.0;
    double cushion = 0.0;  // X - Z, W - W0 or the quotient q
};

Vec zeros(Eigen::Index n) { return Vec::Zero(n); }

double dot(const Vec& a, const NoiseMatrix& m, int k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += a(i) * m(k, i);
    return s;
}

}  // namespace

struct LanePlan {
    Lane lane;
    Scheme scheme = Scheme::Euler;
    bool has_family = false;
    std::vector<Segment> segments;
    std::vector<int> segment_of;     // grid point -> segment
    std::vector<double> annuity;     // backward rules, per grid point
};

struct JointSimulator::Impl {
    TimeGrid grid;
    std::vector<Lane> lanes;
    std::vector<LanePlan> plans;
    std::vector<int> record;
};

namespace {

std::vector<double> lane_breakpoints(const Lane& lane) {
    std::set<double> all;
    for (double b : lane.params.breakpoints()) all.insert(b);
    const auto& pol = lane.policy;
    auto add = [&](const auto& sched) {
        for (double b : sched.breakpoints()) all.insert(b);
    };
    if (pol.is_forward() || pol.kind == PolicyKind::Baseline) {
        add(pol.pref.theta1);
        add(pol.pref.theta2);
        add(pol.pref.beta);
        add(pol.pref.pitilde);
    }
    if (pol.kind == PolicyKind::Constant) add(pol.weights);
    return {all.begin(), all.end()};
}

Segment make_segment(const Lane& lane, Scheme scheme, double t) {
    const auto& pol = lane.policy;
    Segment s;
    s.c = coefficients_at(lane.params, t);
    const auto& c = s.c;
    const auto n = c.mu.size();
    const auto m = c.sigmaY2.size();
    const bool needs_pref = pol.is_forward() || pol.kind == PolicyKind::Baseline;
    if (needs_pref) s.pc = preference_at(pol.pref, t);
    const auto& pc = s.pc;

    const double s1sq = c.sigmaY1.squaredNorm();
    const double s2sq = c.sigmaY2.squaredNorm();
    s.y_log_drift = c.r + c.muY - 0.5 * (s1sq + s2sq);
    s.ratio_drift_base = -c.muY + s1sq + s2sq;
    s.lam_minus_s1 = c.lambda - c.sigmaY1;
    s.floor_vol1 = zeros(n);
    s.floor_vol2 = zeros(m);
    s.x_vol1 = zeros(n);
    s.x_vol2 = zeros(m);

    switch (scheme) {
        case Scheme::Euler: break;
        case Scheme::PowerCushion:
        case Scheme::ExpQuotient: {
            const double alpha = alpha_from_beta(c, pc.beta);
            s.floor_vol1 = pc.beta;
            s.floor_vol2 = -c.sigmaY2;
            s.floor_log_drift = alpha - 0.5 * (pc.beta.squaredNorm() + s2sq);
            s.contrib_rate = -alpha;
            s.baseline = pol.baseline(c, pc);
            s.target = pol.target(c, pc);
            if (scheme == Scheme::PowerCushion) {
                const Vec xi = c.sigma.transpose() * s.target - c.sigmaY1;
                s.x_vol1 = xi;
                s.x_vol2 = -c.sigmaY2;
                s.x_drift = xi.dot(s.lam_minus_s1) + c.lambda.dot(c.sigmaY1) + s2sq - c.muY -
                            0.5 * (xi.squaredNorm() + s2sq);
                s.v_drift = power_v_drift(c, pc);
            } else {
                const Vec zeta = c.sigma.transpose() * (s.target - s.baseline);
                s.x_vol1 = zeta;
                s.x_drift = zeta.dot(s.lam_minus_s1 - pc.beta);
                s.v_drift = exp_V_drift(c, pc);
            }
            break;
        }
        case Scheme::PowerWealthCushion:
        case Scheme::ExpWealthQuotient: {
            const Vec sv = c.sigma.transpose() * pc.pitilde;
            const double rho = c.r + pc.pitilde.dot(c.mu);
            s.floor_vol1 = sv;
            s.floor_log_drift = rho - 0.5 * sv.squaredNorm();
            s.contrib_rate = c.r + c.muY - rho;  // mean salary growth relative to the floor
            s.baseline = pol.baseline(c, pc);
            s.target = pol.target(c, pc);
            if (scheme == Scheme::PowerWealthCushion) {
                const Vec xi = c.sigma.transpose() * s.target;
                s.x_vol1 = xi;
                s.x_drift = c.r + xi.dot(c.lambda) - 0.5 * xi.squaredNorm();
                s.v_drift = powerW_v_drift(c, pc);
            } else {
                const Vec zeta = c.sigma.transpose() * (s.target - s.baseline);
                s.x_vol1 = zeta;
                s.x_drift = zeta.dot(c.lambda - sv);
                s.v_drift = expW_V_drift(c, pc);
            }
            break;
        }
    }
    return s;
}

LanePlan make_plan(const Lane& lane, const TimeGrid& grid) {
    lane.params.validate();
    const auto& pol = lane.policy;
    if (pol.is_forward()) {
        pol.pref.validate(lane.params.n, lane.params.m);
    } else if (pol.kind == PolicyKind::Baseline) {
        for (const Vec& b : pol.pref.beta.values()) {
            if (b.size() != lane.params.n || !b.allFinite()) {
                throw ValidationError("preference.beta", "expected a finite vector of length n");
            }
        }
    }
    if (pol.kind == PolicyKind::Custom && !pol.custom) {
        throw DomainError("lane '" + lane.id + "': custom policy without a rule");
    }
    LanePlan plan;
    plan.lane = lane;
    plan.scheme = scheme_for(pol.kind);
    plan.has_family = pol.is_forward();

    const auto bps = lane_breakpoints(lane);
    grid.require_aligned(bps);
    std::vector<int> cuts{0};
    for (double b : bps) {
        if (b > grid.t0 + kBreakpointTolerance && b <= grid.t1 + kBreakpointTolerance) {
            cuts.push_back(grid.index_of(b));
        }
    }
    cuts.push_back(grid.steps + 1);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    plan.segment_of.resize(static_cast<std::size_t>(grid.steps) + 1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Segment s = make_segment(lane, plan.scheme, grid.time(cuts[i]));
        s.contrib_dt = growth_integral(s.contrib_rate, grid.dt());
        s.k_begin = cuts[i];
        s.k_end = cuts[i + 1];
        for (int k = s.k_begin; k < s.k_end; ++k) {
            plan.segment_of[static_cast<std::size_t>(k)] = static_cast<int>(plan.segments.size());
        }
        plan.segments.push_back(std::move(s));
    }

    if (pol.is_backward()) {
        if (lane.params.n != 1) {
            throw DomainError("lane '" + lane.id + "': backward rules need a single risky asset");
        }
        if (grid.t1 > pol.backward.horizon + kBreakpointTolerance) {
            throw DomainError("lane '" + lane.id + "': simulation runs past the backward horizon");
        }
        plan.annuity.resize(static_cast<std::size_t>(grid.steps) + 1);
        for (int k = 0; k <= grid.steps; ++k) {
            const double t = std::min(grid.time(k), pol.backward.horizon);
            const auto& c = plan.segments[static_cast<std::size_t>(plan.segment_of[static_cast<std::size_t>(k)])].c;
            plan.annuity[static_cast<std::size_t>(k)] =
                pol.kind == PolicyKind::BackwardOracle
                    ? annuity_factor_schedule(lane.params, t, pol.backward.horizon)
                    : annuity_factor(c.muY, c.lambda(0), c.sigmaY1(0), t, pol.backward.horizon);
        }
    }
    return plan;
}

Vec evaluate_policy(const LanePlan& plan, const Segment& seg, int k, double t, const LaneState& st) {
    const auto& pol = plan.lane.policy;
    if (pol.is_backward()) {
        Vec out(1);
        out(0) = backward_weight(seg.c, pol.backward.gamma, plan.annuity[static_cast<std::size_t>(k)], st.x);
        return out;
    }
    PolicyState ps;
    ps.x = st.x;
    ps.w = st.w;
    if (is_wealth_scheme(plan.scheme)) {
        ps.w_floor = st.z;
        ps.gamma_wealth = st.gamma;
    } else {
        ps.z = st.z;
        ps.gamma_ratio = st.gamma;
    }
    return pol.evaluate(t, ps, seg.c, seg.pc);
}

[[noreturn]] void blow_up(const LanePlan& plan, std::uint64_t path, double t) {
    throw BlowUpError("lane '" + plan.lane.id + "', path " + std::to_string(path) +
                      ": state became non-finite at t = " + format_double(t));
}

}  // namespace

JointSimulator::JointSimulator(std::vector<Lane> lanes, TimeGrid grid, std::vector<int> record)
    : impl_(std::make_unique<Impl>()) {
    impl_->grid = grid;
    if (lanes.empty()) throw DomainError("simulation needs at least one lane");
    std::set<std::string> ids;
    for (const auto& lane : lanes) {
        if (!ids.insert(lane.id).second) throw DomainError("duplicate lane id '" + lane.id + "'");
        impl_->plans.push_back(make_plan(lane, grid));
    }
    impl_->lanes = std::move(lanes);
    if (record.empty()) {
        record.resize(static_cast<std::size_t>(grid.steps) + 1);
        for (int k = 0; k <= grid.steps; ++k) record[static_cast<std::size_t>(k)] = k;
    }
    std::sort(record.begin(), record.end());
    record.erase(std::unique(record.begin(), record.end()), record.end());
    if (record.front() < 0 || record.back() > grid.steps) {
        throw DomainError("recorded index outside the time grid");
    }
    impl_->record = std::move(record);
}

JointSimulator::~JointSimulator() = default;
JointSimulator::JointSimulator(JointSimulator&&) noexcept = default;
JointSimulator& JointSimulator::operator=(JointSimulator&&) noexcept = default;

const TimeGrid& JointSimulator::grid() const { return impl_->grid; }
const std::vector<Lane>& JointSimulator::lanes() const { return impl_->lanes; }

PathBundle JointSimulator::run(const NoisePath& noise) const {
    const TimeGrid& grid = impl_->grid;
    const double dt = grid.dt();
    if (noise.steps() != grid.steps) {
        throw DomainError("noise path has " + std::to_string(noise.steps()) + " steps, grid has " +
                          std::to_string(grid.steps));
    }
    PathBundle out;
    out.grid = grid;
    out.path_index = noise.path_index;
    out.indices = impl_->record;
    for (int k : out.indices) out.times.push_back(grid.time(k));
    const std::size_t n_rec = out.indices.size();

    for (const auto& plan : impl_->plans) {
        const auto& params = plan.lane.params;
        if (noise.dB1.cols() != params.n || noise.dB2.cols() != params.m) {
            throw DomainError("lane '" + plan.lane.id + "': noise dimensions do not match n and m");
        }
        LanePath lp;
        lp.id = plan.lane.id;
        for (auto* v : {&lp.Y, &lp.W, &lp.X, &lp.Z, &lp.Gamma, &lp.V}) v->reserve(n_rec);
        lp.pi.reserve(n_rec);

        LaneState st;
        st.y = params.y0;
        st.w = params.w0;
        st.x = params.x0();
        if (plan.has_family) {
            st.gamma = 1.0 / plan.lane.policy.pref.gamma;
        }
        switch (plan.scheme) {
            case Scheme::PowerCushion: st.cushion = st.x - st.z; break;
            case Scheme::ExpQuotient: st.cushion = (st.x - st.z) / st.gamma; break;
            case Scheme::PowerWealthCushion: st.cushion = st.w - st.z; break;
            case Scheme::ExpWealthQuotient: st.cushion = (st.w - st.z) / st.gamma; break;
            case Scheme::Euler: break;
        }

        std::size_t next_rec = 0;
        for (int k = 0; k <= grid.steps; ++k) {
            const double t = grid.time(k);
            const Segment& seg = plan.segments[static_cast<std::size_t>(plan.segment_of[static_cast<std::size_t>(k)])];
            const bool recording = next_rec < n_rec && out.indices[next_rec] == k;
            const bool need_pi = recording || (plan.scheme == Scheme::Euler && k < grid.steps);
            // The log step keeps the cushion positive; rounding in Z + cushion
            // is the only way the floor can be touched, and that is reported.
            if ((plan.scheme == Scheme::PowerCushion || plan.scheme == Scheme::PowerWealthCushion) &&
                !(st.cushion > 0.0 && (plan.scheme == Scheme::PowerCushion ? st.x > st.z : st.w > st.z))) {
                throw AdmissibilityError("lane '" + plan.lane.id + "', path " + std::to_string(noise.path_index) +
                                         ": fund reached its floor at t = " + format_double(t));
            }
            Vec pi;
            if (need_pi) pi = evaluate_policy(plan, seg, k, t, st);
            if (recording) {
                lp.Y.push_back(st.y);
                lp.W.push_back(st.w);
                lp.X.push_back(st.x);
                lp.Z.push_back(st.z);
                lp.Gamma.push_back(st.gamma);
                lp.V.push_back(st.v);
                lp.pi.push_back(pi);
                ++next_rec;
            }
            if (k == grid.steps) break;

            const Segment& sg = seg;
            const auto& c = sg.c;
            const double b1y = dot(c.sigmaY1, noise.dB1, k) + dot(c.sigmaY2, noise.dB2, k);
            const double y_next = st.y * std::exp(sg.y_log_drift * dt + b1y);

            if (plan.scheme == Scheme::Euler) {
                const Vec expo = c.sigma.transpose() * pi;  // Sigma^T pi
                const double drift = pi.dot(c.mu) - expo.dot(c.sigmaY1) + sg.ratio_drift_base;
                const double diff = dot(expo - c.sigmaY1, noise.dB1, k) - dot(c.sigmaY2, noise.dB2, k);
                st.x += c.p * dt + st.x * (drift * dt + diff);
                st.y = y_next;
                st.w = st.x * st.y;
            } else {
                const double floor_growth = std::exp(sg.floor_log_drift * dt + dot(sg.floor_vol1, noise.dB1, k) +
                                                     dot(sg.floor_vol2, noise.dB2, k));
                const double x_noise = dot(sg.x_vol1, noise.dB1, k) + dot(sg.x_vol2, noise.dB2, k);
                st.v += sg.v_drift * dt + dot(sg.pc.theta1, noise.dB1, k) + dot(sg.pc.theta2, noise.dB2, k);
                switch (plan.scheme) {
                    case Scheme::PowerCushion:
                        st.z = floor_growth * (st.z + c.p * sg.contrib_dt);
                        st.cushion *= std::exp(sg.x_drift * dt + x_noise);
                        st.x = st.z + st.cushion;
                        break;
                    case Scheme::ExpQuotient:
                        st.z = floor_growth * (st.z + c.p * sg.contrib_dt);
                        st.gamma *= floor_growth;
                        st.cushion += sg.x_drift * dt + x_noise;
                        st.x = st.z + st.gamma * st.cushion;
                        break;
                    case Scheme::PowerWealthCushion:
                        st.z = floor_growth * (st.z + c.p * st.y * sg.contrib_dt);
                        st.cushion *= std::exp(sg.x_drift * dt + x_noise);
                        st.w = st.z + st.cushion;
                        break;
                    case Scheme::ExpWealthQuotient:
                        st.z = floor_growth * (st.z + c.p * st.y * sg.contrib_dt);
                        st.gamma *= floor_growth;
                        st.cushion += sg.x_drift * dt + x_noise;
                        st.w = st.z + st.gamma * st.cushion;
                        break;
                    case Scheme::Euler: break;
                }
                st.y = y_next;
                if (is_wealth_scheme(plan.scheme)) {
                    st.x = st.w / st.y;
                } else {
                    st.w = st.x * st.y;
                }
            }
            if (!std::isfinite(st.x) || !std::isfinite(st.w) || !std::isfinite(st.z) || !std::isfinite(st.gamma) ||
                !std::isfinite(st.v) || !std::isfinite(st.cushion)) {
                blow_up(plan, noise.path_index, grid.time(k + 1));
            }
        }
        out.lanes.push_back(std::move(lp));
    }
    return out;
}

const LanePath& PathBundle::lane(std::string_view id) const {
    for (const auto& l : lanes) {
        if (l.id == id) return l;
    }
    throw DomainError("no lane named '" + std::string(id) + "'");
}

std::vector<int> checkpoint_indices(const TimeGrid& grid, std::span<const double> times) {
    std::vector<int> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(grid.index_of(t));
    return out;
}

PathBundle simulate_ratio_path(const ModelParams& params, const StrategyPolicy& policy, const NoisePath& noise,
                               const TimeGrid& grid) {
    const std::string id = policy.id.empty() ? std::string(to_string(policy.kind)) : policy.id;
    return JointSimulator({Lane{id, params, policy}}, grid).run(noise);
}

PathBundle simulate_joint(const std::vector<Lane>& lanes, const NoisePath& noise, const TimeGrid& grid) {
    return JointSimulator(lanes, grid).run(noise);
}

PathBundle simulate_joint(const ModelParams& params, const std::vector<StrategyPolicy>& policies,
                          const NoisePath& noise, const TimeGrid& grid) {
    std::vector<Lane> lanes;
    for (std::size_t i = 0; i < policies.size(); ++i) {
        std::string id = policies[i].id.empty() ? "lane" + std::to_string(i + 1) : policies[i].id;
        lanes.push_back(Lane{std::move(id), params, policies[i]});
    }
    return simulate_joint(lanes, noise, grid);
}

std::vector<double> simulate_baseline_ratio(const ModelParams& params, const Schedule<Vec>& beta,
                                            const NoisePath& noise, const TimeGrid& grid, double z0,
                                            bool contributions) {
    if (z0 < 0.0) throw DomainError("baseline ratio needs z0 >= 0");
    params.validate();
    std::vector<double> bps = params.breakpoints();
    for (double b : beta.breakpoints()) bps.push_back(b);
    grid.require_aligned(bps);
    if (noise.steps() != grid.steps) throw DomainError("noise path does not match the grid");
    const double dt = grid.dt();
    std::vector<double> z(static_cast<std::size_t>(grid.steps) + 1);
    z[0] = z0;
    for (int k = 0; k < grid.steps; ++k) {
        const double t = grid.time(k);
        const Coefficients c = coefficients_at(params, t);
        const Vec& b = beta.at(t);
        const double alpha = alpha_from_beta(c, b);
        const double growth = std::exp((alpha - 0.5 * (b.squaredNorm() + c.sigmaY2.squaredNorm())) * dt +
                                       dot(b, noise.dB1, k) - dot(c.sigmaY2, noise.dB2, k));
        const double p = contributions ? c.p : 0.0;
        const auto ku = static_cast<std::size_t>(k);
        z[ku + 1] = growth * (z[ku] + p * growth_integral(-alpha, dt));
        if (!std::isfinite(z[ku + 1])) {
            throw BlowUpError("baseline ratio became non-finite at t = " + format_double(grid.time(k + 1)));
        }
    }
    return z;
}

DirectWealthPath simulate_wealth_direct(const ModelParams& params, const StrategyPolicy& policy,
                                        const NoisePath& noise, const TimeGrid& grid) {
    if (scheme_for(policy.kind) != Scheme::Euler) {
        throw DomainError("direct wealth integration only supports rules without floor or Gamma states");
    }
    params.validate();
    grid.require_aligned(params.breakpoints());
    if (noise.steps() != grid.steps) throw DomainError("noise path does not match the grid");
    const double dt = grid.dt();
    DirectWealthPath out;
    double y = params.y0;
    double w = params.w0;
    for (int k = 0;; ++k) {
        out.Y.push_back(y);
        out.W.push_back(w);
        out.X.push_back(w / y);
        if (k == grid.steps) break;
        const double t = grid.time(k);
        const Coefficients c = coefficients_at(params, t);
        PolicyState ps;
        ps.x = w / y;
        ps.w = w;
        const Vec pi = policy.evaluate(t, ps, params);
        const Vec expo = c.sigma.transpose() * pi;
        w += c.p * y * dt + w * ((c.r + pi.dot(c.mu)) * dt + dot(expo, noise.dB1, k));
        const double s2 = c.sigmaY1.squaredNorm() + c.sigmaY2.squaredNorm();
        y *= std::exp((c.r + c.muY - 0.5 * s2) * dt + dot(c.sigmaY1, noise.dB1, k) + dot(c.sigmaY2, noise.dB2, k));
        if (!std::isfinite(w) || !std::isfinite(y)) {
            throw BlowUpError("fund value became non-finite at t = " + format_double(grid.time(k + 1)));
        }
    }
    return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const PathBundle& bundle, std::string_view lane_id) {
    const LanePath& lp = bundle.lane(lane_id);
    std::vector<std::string> header{"t", "Y", "W", "X", "Z", "Gamma", "V"};
    Eigen::Index n = 0;
    for (const auto& pi : lp.pi) n = std::max(n, pi.size());
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("pi_" + std::to_string(i + 1));
    std::vector<std::vector<double>> rows;
    rows.reserve(bundle.times.size());
    for (std::size_t r = 0; r < bundle.times.size(); ++r) {
        std::vector<double> row{bundle.times[r], lp.Y[r], lp.W[r], lp.X[r], lp.Z[r], lp.Gamma[r], lp.V[r]};
        for (Eigen::Index i = 0; i < n; ++i) row.push_back(i < lp.pi[r].size() ? lp.pi[r](i) : 0.0);
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

}  // namespace fpension
