#include "fpension/config.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

#include "fpension/io.hpp"

namespace fpension {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Built-in parameter sets

const char* kBackwardPitfall = R"({
  // Single risky asset, unhedgeable salary noise switched off.
  "market": { "r": 0.03, "mu": 0.08, "sigma": 0.2 },
  "salary": { "muY": 0.02, "sigmaY1": 0.08, "sigmaY2": 0.0, "y0": 1.0 },
  "plan": { "p": 0.10, "w0": 1.0 },
  "preference": { "family": "power", "gamma": 0.6 },
  "regime": { "horizon": 20.0, "t0": 10.0, "muY_tilde": 0.07 },
  "simulation": { "paths": 10000, "steps_per_year": 252, "checkpoints": [5, 9] }
})";

const char* kPowerShowcase = R"({
  "market": { "r": 0.03, "mu": 0.08, "sigma": 0.2 },
  "salary": { "muY": 0.02, "sigmaY1": 0.08, "sigmaY2": 0.05, "y0": 1.0 },
  "plan": { "p": 0.10, "w0": 1.0 },
  "preference": { "family": "power", "gamma": 0.6, "theta1": 0.0, "theta2": 0.2, "beta": 0.25 },
  "showcase": { "betas": [-0.25, 0.25], "horizon": 10.0, "times": [1, 5, 10] },
  "simulation": { "paths": 10000, "steps_per_year": 252 }
})";

const char* kForwardRevisit = R"({
  "market": { "r": 0.03, "mu": 0.08, "sigma": 0.2 },
  "salary": { "muY": 0.02, "sigmaY1": 0.08, "sigmaY2": 0.05, "y0": 1.0 },
  "plan": { "p": 0.10, "w0": 1.0 },
  "preference": { "family": "power", "gamma": 0.6, "theta1": 0.0, "theta2": 0.2, "beta": 0.25 },
  "regime": { "horizon": 20.0, "t0": 10.0, "muY_tilde": 0.07 },
  "simulation": { "paths": 10000, "steps_per_year": 252, "checkpoints": [15] }
})";

// ---------------------------------------------------------------------------
// Key checking

const std::map<std::string, std::set<std::string>, std::less<>>& schema() {
    static const std::map<std::string, std::set<std::string>, std::less<>> s{
        {"market", {"n", "m", "r", "mu", "sigma"}},
        {"salary", {"muY", "sigmaY1", "sigmaY2", "y0"}},
        {"plan", {"p", "w0"}},
        {"preference", {"family", "gamma", "theta1", "theta2", "beta", "pitilde"}},
        {"simulation", {"paths", "seed", "steps_per_year", "dt", "checkpoints", "workers"}},
        {"regime", {"horizon", "t0", "muY_tilde"}},
        {"showcase", {"betas", "horizon", "times", "x_min", "x_max", "x_points", "x_probe", "ramp", "replay"}},
        {"martingale", {"families", "perturbations"}},
        {"spde", {"samples"}},
        {"consistency", {"paths", "steps_per_year", "horizon"}},
    };
    return s;
}

void check_keys(const json& doc) {
    if (!doc.is_object()) throw ValidationError("(root)", "configuration must be a JSON object");
    for (const auto& [section, body] : doc.items()) {
        if (section == "description" || section == "output_dir") continue;
        auto it = schema().find(section);
        if (it == schema().end()) throw ValidationError(section, "unknown section");
        if (!body.is_object()) throw ValidationError(section, "section must be an object");
        for (const auto& [key, value] : body.items()) {
            if (!it->second.contains(key)) throw ValidationError(section + "." + key, "unknown key");
        }
    }
}

// ---------------------------------------------------------------------------
// Typed readers. Every failure names the dotted key.

const json* find(const json& doc, const std::string& section, const std::string& key) {
    auto s = doc.find(section);
    if (s == doc.end()) return nullptr;
    auto k = s->find(key);
    if (k == s->end()) return nullptr;
    return &*k;
}

const json& require(const json& doc, const std::string& section, const std::string& key) {
    const json* j = find(doc, section, key);
    if (!j) throw ValidationError(section + "." + key, "missing required key");
    return *j;
}

double as_number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ValidationError(key, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError(key, "must be finite");
    return v;
}

long long as_integer(const json& j, const std::string& key) {
    if (j.is_number_integer() || j.is_number_unsigned()) return j.get<long long>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
    }
    throw ValidationError(key, "expected an integer");
}

std::vector<double> as_numbers(const json& j, const std::string& key) {
    if (j.is_number()) return {as_number(j, key)};
    if (!j.is_array()) throw ValidationError(key, "expected a number or an array of numbers");
    std::vector<double> out;
    for (const auto& e : j) out.push_back(as_number(e, key));
    return out;
}

Vec as_vec(const json& j, const std::string& key, Eigen::Index dim) {
    const auto v = as_numbers(j, key);
    if (static_cast<Eigen::Index>(v.size()) != dim) {
        throw ValidationError(key, "expected " + std::to_string(dim) + " entries, found " + std::to_string(v.size()));
    }
    Vec out(dim);
    for (Eigen::Index i = 0; i < dim; ++i) out(i) = v[static_cast<std::size_t>(i)];
    return out;
}

Mat as_mat(const json& j, const std::string& key, Eigen::Index dim) {
    if (j.is_number()) {
        if (dim != 1) throw ValidationError(key, "a single number only describes a 1 x 1 matrix");
        Mat m(1, 1);
        m(0, 0) = as_number(j, key);
        return m;
    }
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
        throw ValidationError(key, "expected " + std::to_string(dim) + " rows");
    }
    Mat m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        const Vec row = as_vec(j[static_cast<std::size_t>(r)], key, dim);
        m.row(r) = row.transpose();
    }
    return m;
}

template <class V, class F>
Schedule<V> as_schedule(const json& j, const std::string& key, F&& value) {
    if (!j.is_object()) return Schedule<V>(value(j));
    for (const auto& [k, _] : j.items()) {
        if (k != "breakpoints" && k != "values") throw ValidationError(key + "." + k, "unknown key");
    }
    if (!j.contains("breakpoints") || !j.contains("values")) {
        throw ValidationError(key, "a schedule object needs 'breakpoints' and 'values'");
    }
    const auto bps = as_numbers(j.at("breakpoints"), key + ".breakpoints");
    const json& vals = j.at("values");
    if (!vals.is_array()) throw ValidationError(key + ".values", "expected an array");
    std::vector<V> vs;
    for (const auto& v : vals) vs.push_back(value(v));
    try {
        return Schedule<V>(bps, std::move(vs));
    } catch (const DomainError& e) {
        throw ValidationError(key, e.what());
    }
}

Schedule<double> scalar_schedule(const json& j, const std::string& key) {
    return as_schedule<double>(j, key, [&](const json& v) { return as_number(v, key); });
}

Schedule<Vec> vec_schedule(const json& j, const std::string& key, Eigen::Index dim) {
    return as_schedule<Vec>(j, key, [&](const json& v) { return as_vec(v, key, dim); });
}

Schedule<Mat> mat_schedule(const json& j, const std::string& key, Eigen::Index dim) {
    return as_schedule<Mat>(j, key, [&](const json& v) { return as_mat(v, key, dim); });
}

// Length of the first value of a vector-valued entry (number = 1).
Eigen::Index infer_dim(const json& j) {
    const json* first = &j;
    if (j.is_object() && j.contains("values") && j.at("values").is_array() && !j.at("values").empty()) {
        first = &j.at("values")[0];
    }
    if (first->is_array()) return static_cast<Eigen::Index>(first->size());
    return 1;
}

// ---------------------------------------------------------------------------
// Overrides

json parse_override_value(const std::string& text) {
    json v = json::parse(text, nullptr, false, true);
    if (v.is_discarded()) return json(text);  // bare words are strings
    return v;
}

void apply_override(json& doc, const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ParseError("override '" + item + "' is not of the form section.key=value");
    }
    const std::string path = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    const auto dot = path.find('.');
    if (dot == std::string::npos) {
        if (path == "output_dir") {
            doc[path] = value;
            return;
        }
        throw ValidationError(path, "override keys are section.key");
    }
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    auto it = schema().find(section);
    if (it == schema().end()) throw ValidationError(path, "unknown section");
    if (!it->second.contains(key)) throw ValidationError(path, "unknown key");
    doc[section][key] = parse_override_value(value);
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed configuration: ") + e.what());
    }
}

template <class T>
void read_opt(const json& doc, const std::string& section, const std::string& key, T& out) {
    const json* j = find(doc, section, key);
    if (!j) return;
    const std::string name = section + "." + key;
    if constexpr (std::is_same_v<T, double>) {
        out = as_number(*j, name);
    } else if constexpr (std::is_same_v<T, int>) {
        out = static_cast<int>(as_integer(*j, name));
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        out = as_numbers(*j, name);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
        out.clear();
        if (!j->is_array()) throw ValidationError(name, "expected an array of integers");
        for (const auto& e : *j) out.push_back(static_cast<int>(as_integer(e, name)));
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        out.clear();
        if (!j->is_array()) throw ValidationError(name, "expected an array of strings");
        for (const auto& e : *j) {
            if (!e.is_string()) throw ValidationError(name, "expected an array of strings");
            out.push_back(e.get<std::string>());
        }
    }
}

RunConfig build(const json& doc) {
    check_keys(doc);
    RunConfig cfg;
    ModelParams& p = cfg.params;

    const json& mu = require(doc, "market", "mu");
    p.n = static_cast<int>(infer_dim(mu));
    if (const json* n = find(doc, "market", "n")) p.n = static_cast<int>(as_integer(*n, "market.n"));
    p.m = 1;
    if (const json* s2 = find(doc, "salary", "sigmaY2")) p.m = static_cast<int>(infer_dim(*s2));
    if (const json* m = find(doc, "market", "m")) p.m = static_cast<int>(as_integer(*m, "market.m"));
    if (p.n < 1 || p.n > kMaxDim) {
        throw ValidationError("market.n", "must be between 1 and " + std::to_string(kMaxDim));
    }
    if (p.m < 1 || p.m > kMaxDim) {
        throw ValidationError("market.m", "must be between 1 and " + std::to_string(kMaxDim));
    }

    p.r = as_number(require(doc, "market", "r"), "market.r");
    p.mu = vec_schedule(mu, "market.mu", p.n);
    p.Sigma = mat_schedule(require(doc, "market", "sigma"), "market.sigma", p.n);
    p.muY = scalar_schedule(require(doc, "salary", "muY"), "salary.muY");
    p.sigmaY1 = vec_schedule(require(doc, "salary", "sigmaY1"), "salary.sigmaY1", p.n);
    if (const json* s2 = find(doc, "salary", "sigmaY2")) {
        p.sigmaY2 = vec_schedule(*s2, "salary.sigmaY2", p.m);
    } else {
        p.sigmaY2 = Schedule<Vec>(Vec::Zero(p.m));
    }
    p.p = scalar_schedule(require(doc, "plan", "p"), "plan.p");
    read_opt(doc, "plan", "w0", p.w0);
    read_opt(doc, "salary", "y0", p.y0);
    p.validate();

    PreferenceSpec& pref = cfg.pref;
    if (const json* f = find(doc, "preference", "family")) {
        if (!f->is_string()) throw ValidationError("preference.family", "expected a string");
        pref.family = family_from_string(f->get<std::string>());
    }
    pref.gamma = is_power(pref.family) ? 0.5 : 1.0;
    read_opt(doc, "preference", "gamma", pref.gamma);
    auto vec_or_zero = [&](const char* key, Eigen::Index dim) {
        const json* j = find(doc, "preference", key);
        return j ? vec_schedule(*j, std::string("preference.") + key, dim) : Schedule<Vec>(Vec::Zero(dim));
    };
    pref.theta1 = vec_or_zero("theta1", p.n);
    pref.theta2 = vec_or_zero("theta2", p.m);
    pref.beta = vec_or_zero("beta", p.n);
    pref.pitilde = vec_or_zero("pitilde", p.n);
    pref.validate(p.n, p.m);

    SimulationConfig& sim = cfg.sim;
    read_opt(doc, "simulation", "paths", sim.paths);
    if (const json* s = find(doc, "simulation", "seed")) {
        const long long v = as_integer(*s, "simulation.seed");
        if (v < 0) throw ValidationError("simulation.seed", "must be non-negative");
        sim.seed = static_cast<std::uint64_t>(v);
    }
    read_opt(doc, "simulation", "steps_per_year", sim.steps_per_year);
    if (const json* d = find(doc, "simulation", "dt")) {
        const double dt = as_number(*d, "simulation.dt");
        const double per_year = dt > 0.0 ? 1.0 / dt : 0.0;
        if (!(dt > 0.0) || std::abs(per_year - std::round(per_year)) > 1e-6 * per_year) {
            throw ValidationError("simulation.dt", "must be 1/k for a whole number k of steps per year");
        }
        sim.steps_per_year = static_cast<int>(std::round(per_year));
    }
    read_opt(doc, "simulation", "checkpoints", sim.checkpoints);
    read_opt(doc, "simulation", "workers", sim.workers);
    if (sim.paths < 1) throw ValidationError("simulation.paths", "must be at least 1");
    if (sim.steps_per_year < 1) throw ValidationError("simulation.steps_per_year", "must be at least 1");
    if (sim.workers < 0) throw ValidationError("simulation.workers", "must be non-negative");
    for (double c : sim.checkpoints) {
        if (c < 0.0) throw ValidationError("simulation.checkpoints", "times must be non-negative");
    }

    RegimeConfig& reg = cfg.regime;
    read_opt(doc, "regime", "horizon", reg.horizon);
    read_opt(doc, "regime", "t0", reg.t0);
    read_opt(doc, "regime", "muY_tilde", reg.muY_tilde);
    if (!(reg.horizon > 0.0)) throw ValidationError("regime.horizon", "must be positive");
    if (!(reg.t0 > 0.0 && reg.t0 < reg.horizon)) throw ValidationError("regime.t0", "must lie in (0, horizon)");

    ShowcaseConfig& sc = cfg.showcase;
    read_opt(doc, "showcase", "betas", sc.betas);
    read_opt(doc, "showcase", "horizon", sc.horizon);
    read_opt(doc, "showcase", "times", sc.times);
    read_opt(doc, "showcase", "x_min", sc.x_min);
    read_opt(doc, "showcase", "x_max", sc.x_max);
    read_opt(doc, "showcase", "x_points", sc.x_points);
    read_opt(doc, "showcase", "x_probe", sc.x_probe);
    read_opt(doc, "showcase", "ramp", sc.ramp);
    if (const json* r = find(doc, "showcase", "replay")) {
        if (!r->is_object()) throw ValidationError("showcase.replay", "expected an object scenario -> file");
        for (const auto& [name, file] : r->items()) {
            if (!file.is_string()) throw ValidationError("showcase.replay." + name, "expected a file path");
            sc.replay[name] = file.get<std::string>();
        }
    }
    if (sc.x_points < 2) throw ValidationError("showcase.x_points", "must be at least 2");
    if (!(sc.x_max > sc.x_min)) throw ValidationError("showcase.x_max", "must exceed showcase.x_min");
    if (!(sc.horizon > 0.0)) throw ValidationError("showcase.horizon", "must be positive");

    read_opt(doc, "martingale", "families", cfg.martingale.families);
    for (const auto& f : cfg.martingale.families) {
        try {
            (void)family_from_string(f);
        } catch (const ValidationError&) {
            throw ValidationError("martingale.families", "unknown family '" + f + "'");
        }
    }
    read_opt(doc, "martingale", "perturbations", cfg.martingale.perturbations);
    read_opt(doc, "spde", "samples", cfg.spde.samples);
    if (cfg.spde.samples < 1) throw ValidationError("spde.samples", "must be at least 1");
    read_opt(doc, "consistency", "paths", cfg.consistency.paths);
    read_opt(doc, "consistency", "steps_per_year", cfg.consistency.steps_per_year);
    read_opt(doc, "consistency", "horizon", cfg.consistency.horizon);

    if (auto it = doc.find("output_dir"); it != doc.end()) {
        if (!it->is_string()) throw ValidationError("output_dir", "expected a path");
        cfg.output_dir = it->get<std::string>();
    }
    return cfg;
}

RunConfig parse_with_overrides(json doc, const std::vector<std::string>& overrides) {
    if (!doc.is_object()) throw ValidationError("(root)", "configuration must be a JSON object");
    for (const auto& o : overrides) apply_override(doc, o);
    return build(doc);
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
    return a;
}

template <class V, class F>
json schedule_json(const Schedule<V>& s, F&& conv) {
    if (s.values().size() == 1) return conv(s.values()[0]);
    json vals = json::array();
    for (const auto& v : s.values()) vals.push_back(conv(v));
    return json{{"breakpoints", std::vector<double>(s.breakpoints().begin(), s.breakpoints().end())},
                {"values", vals}};
}

}  // namespace

const std::map<std::string, std::string, std::less<>>& presets() {
    static const std::map<std::string, std::string, std::less<>> p{
        {"backward-pitfall", kBackwardPitfall},
        {"power-showcase", kPowerShowcase},
        {"forward-revisit", kForwardRevisit},
    };
    return p;
}

RunConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides) {
    return parse_with_overrides(parse_json(text), overrides);
}

RunConfig parse_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    return parse_config_text(read_text_file(file), overrides);
}

RunConfig load_preset(std::string_view name, const std::vector<std::string>& overrides) {
    auto it = presets().find(name);
    if (it == presets().end()) throw ValidationError("preset", "unknown preset '" + std::string(name) + "'");
    return parse_config_text(it->second, overrides);
}

std::string config_snapshot(const RunConfig& cfg) {
    const auto& p = cfg.params;
    auto num = [](double v) { return json(v); };
    json doc;
    doc["market"] = {{"n", p.n},
                     {"m", p.m},
                     {"r", p.r},
                     {"mu", schedule_json(p.mu, vec_json)},
                     {"sigma", schedule_json(p.Sigma, mat_json)}};
    doc["salary"] = {{"muY", schedule_json(p.muY, num)},
                     {"sigmaY1", schedule_json(p.sigmaY1, vec_json)},
                     {"sigmaY2", schedule_json(p.sigmaY2, vec_json)},
                     {"y0", p.y0}};
    doc["plan"] = {{"p", schedule_json(p.p, num)}, {"w0", p.w0}};
    const auto& f = cfg.pref;
    doc["preference"] = {{"family", std::string(to_string(f.family))},
                         {"gamma", f.gamma},
                         {"theta1", schedule_json(f.theta1, vec_json)},
                         {"theta2", schedule_json(f.theta2, vec_json)}};
    if (is_wealth(f.family)) {
        doc["preference"]["pitilde"] = schedule_json(f.pitilde, vec_json);
    } else {
        doc["preference"]["beta"] = schedule_json(f.beta, vec_json);
    }
    doc["simulation"] = {{"paths", cfg.sim.paths},
                         {"seed", cfg.sim.seed},
                         {"steps_per_year", cfg.sim.steps_per_year},
                         {"checkpoints", cfg.sim.checkpoints}};
    doc["regime"] = {{"horizon", cfg.regime.horizon}, {"t0", cfg.regime.t0}, {"muY_tilde", cfg.regime.muY_tilde}};
    return doc.dump();
}

}  // namespace fpension
