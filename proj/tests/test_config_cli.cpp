#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fpension/cli.hpp"
#include "fpension/config.hpp"
#include "fpension/errors.hpp"
#include "fpension/io.hpp"

using namespace fpension;

namespace {

const char* kMinimal = R"({
  // comments are allowed
  "market": { "r": 0.03, "mu": 0.08, "sigma": 0.2 },
  "salary": { "muY": 0.02, "sigmaY1": 0.08, "sigmaY2": 0.05 },
  "plan": { "p": 0.1, "w0": 1.0 },
  "preference": { "family": "power", "gamma": 0.6, "theta1": 0.0, "theta2": 0.2, "beta": 0.25 }
})";

std::string validation_key(const std::string& text, const std::vector<std::string>& ov = {}) {
    try {
        parse_config_text(text, ov);
    } catch (const ValidationError& e) {
        return e.key();
    }
    return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fpension_unit" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fpension");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("a minimal document parses with defaults") {
        const auto cfg = parse_config_text(kMinimal);
        CHECK(cfg.params.n == 1);
        CHECK(cfg.params.r == 0.03);
        CHECK(cfg.params.muY.at(0.0) == 0.02);
        CHECK(cfg.pref.gamma == 0.6);
        CHECK(cfg.sim.paths == 10000);
    }

    TEST_CASE("a missing volatility names the key") {
        std::string text = kMinimal;
        text.replace(text.find(", \"sigma\": 0.2"), std::string(", \"sigma\": 0.2").size(), "");
        CHECK(validation_key(text) == "market.sigma");
    }

    TEST_CASE("overrides replace file values") {
        const auto cfg = parse_config_text(kMinimal, {"salary.muY=0.07", "simulation.paths=12"});
        CHECK(cfg.params.muY.at(0.0) == 0.07);
        CHECK(cfg.sim.paths == 12);
        CHECK(validation_key(kMinimal, {"salary.bogus=1"}) == "salary.bogus");
        CHECK_THROWS(parse_config_text(kMinimal, {"no_equals_sign"}));
    }

    TEST_CASE("unknown keys and sections are rejected") {
        std::string text = kMinimal;
        text.insert(text.rfind('}'), ", \"extra\": { \"a\": 1 }");
        CHECK(validation_key(text) == "extra");
        std::string t2 = kMinimal;
        t2.replace(t2.find("\"w0\""), 4, "\"w1\"");
        CHECK(validation_key(t2) == "plan.w1");
    }

    TEST_CASE("invalid values are rejected") {
        CHECK(validation_key(kMinimal, {"simulation.paths=0"}) == "simulation.paths");
        CHECK(validation_key(kMinimal, {"preference.gamma=1.5"}) == "preference.gamma");
    }

    TEST_CASE("malformed text is a parse error") {
        CHECK_THROWS_AS(parse_config_text("{ \"market\": "), ParseError);
    }

    TEST_CASE("piecewise schedules") {
        const auto cfg =
            parse_config_text(kMinimal, {R"(salary.muY={"breakpoints": [0, 10], "values": [0.02, 0.07]})"});
        CHECK(cfg.params.muY.at(5.0) == 0.02);
        CHECK(cfg.params.muY.at(12.0) == 0.07);
    }

    TEST_CASE("presets carry the reference parameters") {
        const auto pit = load_preset("backward-pitfall");
        CHECK(pit.params.r == 0.03);
        CHECK(pit.params.mu.at(0.0)(0) == 0.08);
        CHECK(pit.params.Sigma.at(0.0)(0, 0) == 0.2);
        CHECK(pit.params.muY.at(0.0) == 0.02);
        CHECK(pit.params.sigmaY1.at(0.0)(0) == 0.08);
        CHECK(pit.params.sigmaY2.at(0.0)(0) == 0.0);
        CHECK(pit.params.p.at(0.0) == 0.10);
        CHECK(pit.params.x0() == 1.0);
        CHECK(pit.pref.gamma == 0.6);
        CHECK(pit.regime.horizon == 20.0);
        CHECK(pit.regime.t0 == 10.0);
        CHECK(pit.regime.muY_tilde == 0.07);

        const auto show = load_preset("power-showcase");
        CHECK(show.params.sigmaY2.at(0.0)(0) == 0.05);
        CHECK(show.pref.theta1.at(0.0)(0) == 0.0);
        CHECK(show.pref.theta2.at(0.0)(0) == 0.2);
        CHECK(show.pref.beta.at(0.0)(0) == 0.25);
        CHECK(show.showcase.betas == std::vector<double>{-0.25, 0.25});
        CHECK_THROWS_AS(load_preset("nope"), ValidationError);
    }

    TEST_CASE("snapshots parse back to the same parameters") {
        const auto cfg = load_preset("forward-revisit");
        const auto again = parse_config_text(config_snapshot(cfg));
        CHECK(config_snapshot(again) == config_snapshot(cfg));
    }

    TEST_CASE("the shipped example config is valid") {
        const auto file = std::filesystem::path(FPENSION_SOURCE_DIR) / "configs" / "example.jsonc";
        const auto cfg = parse_config(file);
        CHECK(cfg.params.n >= 1);
    }

    TEST_CASE("an unreadable file is an I/O error") {
        CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), IoError);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("help lists experiments and presets") {
        const auto r = cli({"--help"});
        CHECK(r.code == 0);
        for (const char* id : {"backward-pitfall", "forward-revisit", "power-showcase", "martingale", "spde",
                               "integrator"}) {
            CHECK(r.out.find(id) != std::string::npos);
        }
    }

    TEST_CASE("usage errors exit with code 2") {
        CHECK(cli({}).code == kExitUsage);
        const auto r = cli({"experiment", "no-such-study"});
        CHECK(r.code == kExitUsage);
        CHECK(r.err.find("Usage") != std::string::npos);
        CHECK(cli({"verify", "spde", "--bogus"}).code == kExitUsage);
    }

    TEST_CASE("configuration problems map to their exit codes") {
        const auto dir = scratch_dir("cli_codes");
        CHECK(cli({"verify", "spde", "--set", "spde.samples=-1", "-o", dir.string()}).code == kExitValidation);
        CHECK(cli({"verify", "spde", "--set", "market.bogus=1", "-o", dir.string()}).code == kExitValidation);
        const auto bad = dir / "bad.json";
        write_text_file(bad, "{ not json");
        CHECK(cli({"verify", "spde", "--config", bad.string(), "-o", dir.string()}).code == kExitUsage);
        CHECK(cli({"verify", "spde", "--config", (dir / "missing.json").string()}).code == kExitIo);
        // A regular file where the output directory should go.
        const auto blocker = dir / "blocker";
        write_text_file(blocker, "x");
        CHECK(cli({"verify", "spde", "--set", "spde.samples=5", "-o", blocker.string()}).code == kExitIo);
    }

    TEST_CASE("a passing suite writes its report and exits 0") {
        const auto dir = scratch_dir("cli_spde");
        const auto r = cli({"verify", "spde", "--set", "spde.samples=200", "-o", dir.string()});
        CHECK(r.code == kExitOk);
        CHECK(std::filesystem::exists(dir / "spde" / "report.json"));
        CHECK(std::filesystem::exists(dir / "spde" / "run_meta.json"));
        CHECK(r.out.find("PASS") != std::string::npos);
    }

    TEST_CASE("the output directory defaults to the environment variable") {
        const auto dir = scratch_dir("cli_env");
        ::setenv(kOutputDirEnv, dir.string().c_str(), 1);
        const auto r = cli({"verify", "spde", "--set", "spde.samples=20"});
        ::unsetenv(kOutputDirEnv);
        CHECK(r.code == kExitOk);
        CHECK(std::filesystem::exists(dir / "spde" / "report.json"));
    }

    TEST_CASE("simulate writes a trajectory and a replayable noise file") {
        const auto dir = scratch_dir("cli_sim");
        const auto noise = (dir / "noise.csv").string();
        auto r = cli({"simulate", "--preset", "power-showcase", "--horizon", "2", "--noise-out", noise, "-o",
                      dir.string()});
        REQUIRE(r.code == kExitOk);
        const auto first = read_text_file(dir / "simulate" / "trajectory.csv");
        r = cli({"simulate", "--preset", "power-showcase", "--horizon", "2", "--noise-in", noise, "-o",
                 dir.string()});
        REQUIRE(r.code == kExitOk);
        CHECK(read_text_file(dir / "simulate" / "trajectory.csv") == first);
        r = cli({"simulate", "--preset", "power-showcase", "--horizon", "3", "--noise-in", noise, "-o",
                 dir.string()});
        CHECK(r.code == kExitValidation);
    }

    TEST_CASE("presets are listed and printable") {
        auto r = cli({"presets"});
        CHECK(r.code == 0);
        CHECK(r.out.find("backward-pitfall") != std::string::npos);
        r = cli({"presets", "--show", "power-showcase"});
        CHECK(r.code == 0);
        CHECK(r.out.find("\"beta\": 0.25") != std::string::npos);
    }
}
