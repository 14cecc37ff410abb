#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles/oracles.hpp"
#include "paramp/cli.hpp"

using namespace paramp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

// In-process invocation.
Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "paramp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Out-of-process invocation of the built binary, with an optional
// environment prefix.
int run_binary(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" PARAMP_CLI_PATH "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return io::read_text_file(p); }

json report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

}  // namespace

TEST(CliExitCodes, UsageAndHelp) {
    EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
    EXPECT_EQ(run({"--version"}).code, cli::kExitOk);
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
    const auto bad = run({"--no-such-flag", "synth"});
    EXPECT_EQ(bad.code, cli::kExitUsage);
    EXPECT_NE(bad.err.find("usage error"), std::string::npos);
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary("bogus"), 64);
}

TEST(CliExitCodes, ValidationNumericalAndCheck) {
    const auto dir = oracle::scratch_dir("cli_codes");
    const std::string out = (dir / "o").string();
    auto r = run({"--out", out, "simulate", "gain", "--set", "simulate.target_gain_db=80"});
    EXPECT_EQ(r.code, cli::kExitValidation) << r.err;
    r = run({"--out", out, "fit", "s21", "-i", (dir / "missing.csv").string()});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find("cannot open"), std::string::npos);
    r = run({"--out", out, "simulate", "compression", "--set",
             "simulate.compression.skip_unconverged=false"});
    EXPECT_EQ(r.code, cli::kExitNumerical) << r.err;
    EXPECT_NE(r.err.find("last iterate"), std::string::npos);

    EXPECT_EQ(run({"--out", out, "filter", "check", "--check", "4:8:50"}).code, cli::kExitOk);
    r = run({"--out", out, "filter", "check", "--check", "0.01:0.2:50"});
    EXPECT_EQ(r.code, cli::kExitCheckFailed);
    EXPECT_FALSE(report(out)["results"]["check"]["pass"].get<bool>());
    EXPECT_EQ(run({"--out", out, "filter", "check", "--check", "4:8"}).code, cli::kExitValidation);
    EXPECT_EQ(run_binary("--quiet --out " + out + " filter check --check 0.01:0.2:50"), 1);
}

TEST(CliConfig, RejectsUnknownKeysAndTypes) {
    const auto dir = oracle::scratch_dir("cli_config");
    const std::string out = (dir / "o").string();
    auto r = run({"--out", out, "filter", "design", "--set", "filter.ordr=3"});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find("filter.ordr"), std::string::npos);
    EXPECT_EQ(run({"--out", out, "filter", "design", "--set", "filter.order=high"}).code,
              cli::kExitValidation);
    EXPECT_EQ(run({"--out", out, "filter", "design", "--set", "filter.order"}).code,
              cli::kExitValidation);

    std::ofstream(dir / "bad.json") << R"({"mode": {"f0": 6e9, "q": 3}})";
    r = run({"--out", out, "--config", (dir / "bad.json").string(), "simulate", "snr"});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find("mode.q"), std::string::npos);
    std::ofstream(dir / "broken.json") << "{";
    EXPECT_EQ(run({"--out", out, "--config", (dir / "broken.json").string(), "simulate", "snr"}).code,
              cli::kExitValidation);

    std::ofstream(dir / "good.json") << R"({"filter": {"order": 3}})";
    r = run({"--out", out, "--config", (dir / "good.json").string(), "filter", "design"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(report(out)["results"]["prototype_g"].size(), 4u);
    EXPECT_EQ(report(out)["config"]["filter"]["ripple_db"], 0.5);
}

TEST(CliReproducibility, SameSeedSameBytes) {
    const auto dir = oracle::scratch_dir("cli_repro");
    for (const char* d : {"a", "b"}) {
        ASSERT_EQ(run({"--quiet", "--seed", "5", "--out", (dir / d).string(), "synth"}).code, 0);
    }
    ASSERT_EQ(run({"--quiet", "--seed", "6", "--out", (dir / "c").string(), "synth"}).code, 0);
    for (const char* f : {"report.json", "s21.csv", "gain.csv", "kerr.csv", "spectrum_off.csv",
                          "spectrum_on.csv"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    EXPECT_NE(slurp(dir / "a" / "s21.csv"), slurp(dir / "c" / "s21.csv"));
    const json rep = report(dir / "a");
    EXPECT_EQ(rep["schema"], cli::kReportSchema);
    EXPECT_EQ(rep["command"], "synth");
    EXPECT_EQ(rep["seed"], 5);
    EXPECT_EQ(rep["artifacts"].size(), 5u);
    const json meta = json::parse(slurp(dir / "a" / "meta.json"));
    EXPECT_TRUE(meta["meta"].contains("generated_at"));
}

TEST(CliReproducibility, SeedFromEnvironment) {
    const auto dir = oracle::scratch_dir("cli_env");
    const std::string a = (dir / "flag").string(), b = (dir / "env").string();
    ASSERT_EQ(run_binary("--seed 9 --out " + a + " synth --kind kerr"), 0);
    ASSERT_EQ(run_binary("--out " + b + " synth --kind kerr", "PARAMP_LAB_SEED=9"), 0);
    EXPECT_EQ(slurp(dir / "flag" / "kerr.csv"), slurp(dir / "env" / "kerr.csv"));
    EXPECT_EQ(report(b)["seed"], 9);
    // The flag wins over the environment.
    ASSERT_EQ(run_binary("--seed 9 --out " + b + " synth --kind kerr", "PARAMP_LAB_SEED=1"), 0);
    EXPECT_EQ(slurp(dir / "flag" / "kerr.csv"), slurp(dir / "env" / "kerr.csv"));
    EXPECT_EQ(run_binary("--out " + b + " synth --kind kerr", "PARAMP_LAB_SEED=x1"), 2);
}

TEST(CliRoundTrip, NoiselessFitRecoversGenerator) {
    const auto dir = oracle::scratch_dir("cli_fit");
    const std::string syn = (dir / "syn").string(), fit = (dir / "fit").string();
    ASSERT_EQ(run({"--quiet", "--out", syn, "synth", "--kind", "s21", "--set",
                   "synth.resonator.noise_rel=0", "--set", "synth.resonator.phi=0.2"})
                  .code,
              0);
    const auto r = run({"--quiet", "--out", fit, "fit", "s21", "-i", syn + "/s21.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json p = report(fit)["results"]["fit"]["params"];
    EXPECT_NEAR(p["f0"]["value"].get<double>() / 6.4e9, 1.0, 1e-9);
    EXPECT_NEAR(p["Q_i"]["value"].get<double>() / 4363.0, 1.0, 1e-6);
    EXPECT_NEAR(p["Q_c"]["value"].get<double>() / 50.0, 1.0, 1e-6);
    EXPECT_NEAR(p["phi"]["value"].get<double>(), 0.2, 1e-6);
}

TEST(CliRoundTrip, SyntheticOutputsReIngest) {
    const auto dir = oracle::scratch_dir("cli_ingest");
    const std::string syn = (dir / "syn").string();
    ASSERT_EQ(run({"--quiet", "--seed", "3", "--out", syn, "synth"}).code, 0);
    const auto g = run({"--quiet", "--out", (dir / "g").string(), "fit", "gain", "-i", syn + "/gain.csv"});
    EXPECT_EQ(g.code, 0) << g.err;
    const auto k = run({"--quiet", "--out", (dir / "k").string(), "fit", "kerr", "-i", syn + "/kerr.csv"});
    ASSERT_EQ(k.code, 0) << k.err;
    const json kp = report(dir / "k")["results"]["fit"]["params"]["K"];
    EXPECT_LT(std::abs(kp["value"].get<double>() + 20e3), 3.0 * kp["std_error"].get<double>());
    const auto s = run({"--quiet", "--out", (dir / "s").string(), "fit", "s21", "-i", syn + "/s21.csv"});
    EXPECT_EQ(s.code, 0) << s.err;
    // Typed readers accept the spectra as well.
    EXPECT_EQ(io::read_spectrum(syn + "/spectrum_on.csv").freq.size(), 2001u);
}

TEST(CliCommands, GainSynthPeakAtTarget) {
    const auto dir = oracle::scratch_dir("cli_gain");
    ASSERT_EQ(run({"--quiet", "--out", dir.string(), "synth", "--kind", "gain", "--set",
                   "synth.gain.noise_db=0"})
                  .code,
              0);
    const auto tr = io::read_gain_trace(dir / "gain.csv");
    const double peak = *std::max_element(tr.gain_db.begin(), tr.gain_db.end());
    EXPECT_NEAR(peak, 20.0, 0.1);
}

TEST(CliCommands, PhotonNumberAndChain) {
    const auto dir = oracle::scratch_dir("cli_cal");
    ASSERT_EQ(run({"--quiet", "--out", dir.string(), "calibrate", "photon-number"}).code, 0);
    json res = report(dir)["results"];
    EXPECT_NEAR(res["cavity_output_power_dbm"].get<double>(), -138.09, 0.1);
    EXPECT_NEAR(res["photons"].get<double>(), 0.0565, 1e-12);

    ASSERT_EQ(run({"--quiet", "--out", dir.string(), "calibrate", "chain"}).code, 0);
    res = report(dir)["results"];
    EXPECT_EQ(res["probe_attenuation_db"].get<double>(), -99.0);
    EXPECT_NEAR(res["pump_at_pa_dbm"].get<double>(), -80.1, 1e-12);
    // Amplifier at 20 dB, then the 1.3 dB cold loss, then both HEMTs.
    const double tq = kerr::quantum_limit_temperature(6.3139e9);
    const double loss = db_to_linear(-1.3);
    const double expected = tq + (1.0 / loss - 1.0) * 0.02 / 100.0 + 2.2 / (100.0 * loss) +
                            75.0 / (100.0 * loss * 1e4);
    EXPECT_NEAR(res["system_noise_temperature_k"].get<double>(), expected, 1e-12);
    EXPECT_TRUE(res["pump_referral"]["levels"].back()["compressed"].get<bool>());
}

TEST(CliCommands, SimulateAndPlotOutputs) {
    const auto dir = oracle::scratch_dir("cli_sim");
    const auto r = run({"--json", "--plot", "--out", dir.string(), "simulate", "gain"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json rep = json::parse(r.out);
    EXPECT_EQ(rep["command"], "simulate gain");
    EXPECT_NEAR(rep["results"]["operating_point"]["peak_gain_db"].get<double>(), 20.0, 0.1);
    EXPECT_TRUE(fs::exists(dir / "gain.svg"));
    EXPECT_EQ(slurp(dir / "gain.svg").rfind("<svg", 0), 0u);
    const auto snr = run({"--out", dir.string(), "simulate", "snr"});
    ASSERT_EQ(snr.code, 0) << snr.err;
    EXPECT_NE(snr.out.find("report:"), std::string::npos);
    EXPECT_NEAR(report(dir)["results"]["asymptote_db"].get<double>(), 9.16994, 1e-4);
}

TEST(CliConfig, ShippedConfigsLoad) {
    const auto dir = oracle::scratch_dir("cli_shipped");
    const fs::path configs = PARAMP_CONFIG_DIR;
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
        {"reference_mode.json", {"simulate", "gain"}},
        {"chain.json", {"calibrate", "chain"}},
        {"filter_check.json", {"filter", "check"}},
    };
    for (const auto& [file, cmd] : cases) {
        std::vector<std::string> args = {"--quiet", "--config", (configs / file).string(), "--out",
                                         (dir / file).string()};
        args.insert(args.end(), cmd.begin(), cmd.end());
        const auto r = run(args);
        EXPECT_EQ(r.code, cli::kExitOk) << file << ": " << r.err;
    }
}
