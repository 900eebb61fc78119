#include "fpension/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include "fpension/config.hpp"
#include "fpension/engine.hpp"
#include "fpension/experiments.hpp"
#include "fpension/io.hpp"
#include "fpension/stats.hpp"

namespace fpension {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
    return s;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, _] : presets()) names.push_back(name);
    return names;
}

/// Options shared by every command that builds a RunConfig.
struct CommonOptions {
    std::string config_file;
    std::string preset;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<int> workers;
    std::string output;

    void attach(CLI::App* cmd) {
        auto* c = cmd->add_option("--config,-c", config_file, "JSON config file (comments allowed)");
        auto* p = cmd->add_option("--preset,-p", preset, "built-in parameter set")->check(CLI::IsMember(preset_names()));
        c->excludes(p);
        cmd->add_option("--set,-s", overrides, "override a config value, e.g. --set salary.muY=0.07")
            ->type_name("KEY=VALUE");
        cmd->add_option("--seed", seed, "master seed of all random streams");
        cmd->add_option("--paths", paths, "number of Monte-Carlo paths")->check(CLI::PositiveNumber);
        cmd->add_option("--workers,-j", workers, "worker threads (default: hardware parallelism)")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--output,-o", output,
                        std::string("output directory (default: $") + kOutputDirEnv + ", then the config value)");
    }

    RunConfig load(const std::string& default_preset) const {
        std::vector<std::string> ov = overrides;
        if (seed) ov.push_back("simulation.seed=" + std::to_string(*seed));
        if (paths) ov.push_back("simulation.paths=" + std::to_string(*paths));
        if (!config_file.empty()) return parse_config(config_file, ov);
        return load_preset(preset.empty() ? default_preset : preset, ov);
    }

    int worker_count(const RunConfig& cfg) const {
        const int w = workers ? *workers : cfg.sim.workers;
        return w > 0 ? w : default_workers();
    }

    std::filesystem::path output_root(const RunConfig& cfg) const {
        if (!output.empty()) return output;
        if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
        return cfg.output_dir;
    }
};

void write_run_meta(const std::filesystem::path& dir, const std::string& command, int workers, double seconds) {
    const json meta = {{"command", command}, {"workers", workers}, {"wall_clock_seconds", seconds}};
    write_text_file(dir / "run_meta.json", meta.dump(2) + "\n");
}

int finish_report(const ExperimentReport& rep, const std::filesystem::path& dir, std::ostream& out) {
    write_report(dir, rep);
    for (const auto& v : rep.verdicts) {
        out << (v.pass ? "PASS " : "FAIL ") << v.name << "  value=" << format_double(v.value) << "  [" << v.rule
            << "]\n";
    }
    out << rep.id << ": " << (rep.passed() ? "all verdicts passed" : "verdict failure") << " (" << dir.string()
        << ")\n";
    return rep.passed() ? kExitOk : kExitVerdictFailed;
}

template <class Run>
int run_scripted(const std::string& id, const RunConfig& cfg, const CommonOptions& opts, Run&& run,
                 std::ostream& out) {
    const std::filesystem::path dir = opts.output_root(cfg) / id;
    std::filesystem::create_directories(dir);
    ExperimentContext ctx{dir, opts.worker_count(cfg)};
    write_text_file(dir / "config.json", json::parse(config_snapshot(cfg)).dump(2) + "\n");
    const auto start = std::chrono::steady_clock::now();
    const ExperimentReport rep = run(id, cfg, ctx);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    write_run_meta(dir, id, ctx.workers, elapsed.count());
    return finish_report(rep, dir, out);
}

StrategyPolicy policy_from_name(const std::string& name, const RunConfig& cfg) {
    const BackwardPlan plan{cfg.regime.horizon, cfg.pref.gamma};
    if (name == "forward") return make_forward_policy(cfg.pref, "forward");
    if (name == "baseline") return make_baseline_policy(cfg.pref, "baseline");
    if (name == "backward") return make_backward_policy(plan, PolicyKind::Backward, "backward");
    if (name == "backward_adapting") return make_backward_policy(plan, PolicyKind::BackwardAdapting, "backward_adapting");
    return make_backward_policy(plan, PolicyKind::BackwardOracle, "backward_oracle");
}

int run_simulate(const CommonOptions& opts, const std::string& policy_name, std::optional<double> horizon,
                 std::uint64_t path_index, const std::string& noise_in, const std::string& noise_out,
                 std::ostream& out) {
    const RunConfig cfg = opts.load("power-showcase");
    const double T = horizon ? *horizon : cfg.regime.horizon;
    const TimeGrid grid = TimeGrid::with_step(0.0, T, 1.0 / cfg.sim.steps_per_year);
    const NoisePath noise = noise_in.empty()
                                ? generate_noise(cfg.sim.seed, path_index, grid, cfg.params.n, cfg.params.m)
                                : read_noise_csv(noise_in, grid.steps, cfg.params.n, cfg.params.m);
    const StrategyPolicy policy = policy_from_name(policy_name, cfg);
    const auto start = std::chrono::steady_clock::now();
    const PathBundle bundle = simulate_ratio_path(cfg.params, policy, noise, grid);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    const std::filesystem::path dir = opts.output_root(cfg) / "simulate";
    write_trajectory_csv(dir / "trajectory.csv", bundle, policy.id);
    if (!noise_out.empty()) write_noise_csv(noise_out, noise);
    write_text_file(dir / "config.json", json::parse(config_snapshot(cfg)).dump(2) + "\n");
    write_run_meta(dir, "simulate", 1, elapsed.count());

    const auto& lane = bundle.lanes.front();
    out << "simulated " << grid.steps << " steps of policy " << policy.id << " on path " << path_index << "\n"
        << "X(T) = " << format_double(lane.X.back()) << ", W(T) = " << format_double(lane.W.back())
        << ", Y(T) = " << format_double(lane.Y.back()) << "\n"
        << "trajectory: " << (dir / "trajectory.csv").string() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Forward-utility toolkit for defined-contribution pension accumulation"};
    app.require_subcommand(1);
    app.footer("Experiments: " + join(experiment_ids()) + "\nVerification suites: " + join(verification_ids()) +
               "\nPresets: " + join(preset_names()) +
               "\nExit codes: 0 pass, 1 verdict failure, 2 usage or parse error, 3 invalid configuration, 4 I/O error" +
               "\nDefault output directory: $" + kOutputDirEnv);

    CommonOptions sim_opts, exp_opts, ver_opts;

    auto* simulate = app.add_subcommand("simulate", "simulate one path and write its trajectory CSV");
    sim_opts.attach(simulate);
    std::string policy_name = "forward";
    std::optional<double> horizon;
    std::uint64_t path_index = 0;
    std::string noise_in, noise_out;
    simulate->add_option("--policy", policy_name, "strategy to follow")
        ->check(CLI::IsMember({"forward", "baseline", "backward", "backward_adapting", "backward_oracle"}));
    simulate->add_option("--horizon", horizon, "simulation horizon in years (default: regime.horizon)")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--path-index", path_index, "index of the random stream to use");
    simulate->add_option("--noise-in", noise_in, "replay Brownian increments from a CSV file")->check(CLI::ExistingFile);
    simulate->add_option("--noise-out", noise_out, "save the Brownian increments for later replay");

    auto* experiment = app.add_subcommand("experiment", "run a scripted study (" + join(experiment_ids()) + ")");
    std::string experiment_id;
    experiment->add_option("id", experiment_id, "experiment id")->required()->check(CLI::IsMember(experiment_ids()));
    exp_opts.attach(experiment);

    auto* verify = app.add_subcommand("verify", "run a verification suite (" + join(verification_ids()) + ")");
    std::string suite_id;
    std::vector<std::string> families;
    verify->add_option("suite", suite_id, "suite id")->required()->check(CLI::IsMember(verification_ids()));
    verify->add_option("--family", families, "preference families of the martingale suite")
        ->check(CLI::IsMember({"power", "exp", "powerW", "expW"}));
    ver_opts.attach(verify);

    auto* list = app.add_subcommand("presets", "list the built-in parameter sets");
    std::string show;
    list->add_option("--show", show, "print one preset")->check(CLI::IsMember(preset_names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) {
            return run_simulate(sim_opts, policy_name, horizon, path_index, noise_in, noise_out, out);
        }
        if (experiment->parsed()) {
            const RunConfig cfg = exp_opts.load(experiment_id);
            return run_scripted(experiment_id, cfg, exp_opts, run_experiment, out);
        }
        if (verify->parsed()) {
            RunConfig cfg = ver_opts.load("power-showcase");
            if (!families.empty()) cfg.martingale.families = families;
            return run_scripted(suite_id, cfg, ver_opts, run_verification, out);
        }
        if (!show.empty()) {
            out << presets().find(show)->second;
            return kExitOk;
        }
        for (const auto& name : preset_names()) out << name << "\n";
        return kExitOk;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace fpension
