#ifndef PARAMP_CLI_HPP
#define PARAMP_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "paramp/calibration.hpp"
#include "paramp/circuit_model.hpp"
#include "paramp/error.hpp"
#include "paramp/filter_synth.hpp"
#include "paramp/fitting.hpp"
#include "paramp/io/csv.hpp"
#include "paramp/io/files.hpp"
#include "paramp/io/json.hpp"
#include "paramp/io/svg.hpp"
#include "paramp/kerr_dynamics.hpp"

namespace paramp::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitUsage = 64;
inline constexpr int kReportSchema = 1;
inline constexpr const char* kSeedEnv = "PARAMP_LAB_SEED";
inline constexpr const char* kVersion = "0.1.0";

/// Every key the tool understands, with its default. Config files and
/// `--set` may only touch keys that exist here.
inline json default_config() {
    return json::parse(R"({
  "mode": {"f0": 6.4e9, "q_c": 50.0, "q_i": 4000.0, "kerr": -20e3},
  "simulate": {
    "target_gain_db": 20.0,
    "profile_points": 2001,
    "sweep": {"points": 50, "from_fraction": 0.5, "to_fraction": 0.9999},
    "compression": {"p_start_dbm": -150.0, "p_stop_dbm": -95.0, "points": 111,
                    "signal_offset_hz": 1e3, "skip_unconverged": true},
    "snr": {"t_hemt_k": 2.2, "f_hz": 6.3139e9, "g_max_db": 30.0, "points": 61}
  },
  "fit": {"input": ""},
  "calibrate": {
    "kappa_hz": 11.34e6, "f_r": 5.862e9, "chi_hz": 1.33e6,
    "c_photons_per_mw": 5.65, "p_sg_dbm": -20.0,
    "chain": {"input_dbm": -1.2, "pa_gain_db": 20.0, "pa_f_hz": 6.3139e9,
              "probe": null, "pump": null, "readout": null}
  },
  "filter": {
    "order": 5, "ripple_db": 0.5, "cutoff_hz": 0.3e9, "z0": 50.0,
    "check": {"enabled": false, "f_lo_hz": 4e9, "f_hi_hz": 8e9, "threshold_db": 50.0},
    "thickness_variation": 0.2,
    "response": {"f_lo_hz": 1e7, "f_hi_hz": 2e10, "points": 2001}
  },
  "synth": {
    "kind": "all",
    "resonator": {"f0": 6.4e9, "q_i": 4363.0, "q_c": 50.0, "phi": 0.0, "amplitude": 1.0,
                  "alpha": 0.0, "tau": 0.0, "span_linewidths": 6.0, "points": 2001,
                  "noise_rel": 0.0316227766016838},
    "gain": {"points": 801, "span_linewidths": 1.0, "noise_db": 0.1},
    "kerr": {"k_hz": -20e3, "f_r0": 6.4e9, "n_max": 490.0, "points": 50, "noise_hz": 5e3},
    "spectrum": {"gain_db": 15.0, "t_hemt_k": 2.2, "f_signal_hz": 6.3134e9,
                 "signal_dbm": -140.0, "rbw_hz": 1e3, "span_hz": 2e6, "points": 2001,
                 "noise_db": 0.5}
  }
})");
}

namespace detail_cli {

/// Recursively rejects keys absent from `reference`. Objects recurse;
/// a null default accepts any value.
inline void check_known_keys(const json& user, const json& reference, const std::string& prefix) {
    if (!user.is_object()) return;
    if (!reference.is_object()) {
        if (reference.is_null()) return;
        throw ValidationError("config key '" + prefix + "' is not an object");
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!reference.contains(it.key())) throw ValidationError("unknown config key '" + path + "'");
        check_known_keys(it.value(), reference.at(it.key()), path);
    }
}

inline void apply_set(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json* node = &cfg;
    std::stringstream ss(key);
    std::string part;
    std::string walked;
    while (std::getline(ss, part, '.')) {
        walked += (walked.empty() ? "" : ".") + part;
        if (!node->is_object() || !node->contains(part)) {
            throw ValidationError("unknown config key '" + walked + "'");
        }
        node = &(*node)[part];
    }
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (!node->is_null()) {
        const bool both_numbers = node->is_number() && value.is_number();
        if (!both_numbers && node->type() != value.type()) {
            throw ValidationError("config key '" + key + "' expects a " +
                                  std::string(node->type_name()) + ", got '" + text + "'");
        }
        check_known_keys(value, *node, key);
    }
    *node = value;
}

inline void merge(json& target, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.value().is_object() && target.contains(it.key()) && target[it.key()].is_object()) {
            merge(target[it.key()], it.value());
        } else {
            target[it.key()] = it.value();
        }
    }
}

inline double num(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError(std::string("config value '") + key + "' must be a number");
    return v.get<double>();
}

inline int integer(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ValidationError(std::string("config value '") + key + "' must be an integer");
    }
    return v.get<int>();
}

inline std::string dbm(double watts) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f dBm", watts_to_dbm(watts));
    return b;
}

inline std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

}  // namespace detail_cli

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "paramp-out";
    std::optional<std::uint64_t> seed;
    bool plot = false;
    bool quiet = false;
    bool json_output = false;

    // subcommand-specific
    std::string input;
    std::string synth_kind;
    std::optional<int> filter_order;
    std::optional<double> ripple_db;
    std::optional<double> cutoff_ghz;
    std::optional<double> z0;
    std::string check_spec;
};

/// Output sink for one command: collects results and artifacts, writes
/// them at the end.
class Run {
public:
    Run(std::string command, json config, std::uint64_t seed, const Options& opt)
        : command_(std::move(command)), config_(std::move(config)), seed_(seed), opt_(opt) {}

    json& results() { return results_; }
    const json& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    std::filesystem::path path(const std::string& name) const {
        return std::filesystem::path(opt_.out_dir) / name;
    }

    void table(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns, const std::string& title = "") {
        io::write_table(path(name), header, columns);
        artifacts_.push_back(name);
        if (opt_.plot && columns.size() >= 2) {
            std::vector<io::Series> series;
            for (std::size_t c = 1; c < columns.size(); ++c) {
                series.push_back({header[c], columns[0], columns[c]});
            }
            const std::string svg_name = std::filesystem::path(name).replace_extension(".svg").string();
            io::write_file_atomic(path(svg_name),
                                  io::svg_line_plot(title.empty() ? name : title, header[0],
                                                    header.size() == 2 ? header[1] : "", series));
            artifacts_.push_back(svg_name);
        }
    }

    void text(const std::string& name, const std::string& content) {
        io::write_file_atomic(path(name), content);
        artifacts_.push_back(name);
    }

    void say(const std::string& line) { summary_.push_back(line); }

    json report() const {
        return {{"schema", kReportSchema},
                {"command", command_},
                {"seed", seed_},
                {"config", config_},
                {"results", results_},
                {"artifacts", artifacts_}};
    }

    void finish(std::ostream& out) {
        const json rep = report();
        io::write_file_atomic(path("report.json"), rep.dump(2) + "\n");
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::ostringstream ts;
        ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
        const json meta = {{"meta", {{"generated_at", ts.str()}, {"tool_version", kVersion}}}};
        io::write_file_atomic(path("meta.json"), meta.dump(2) + "\n");
        if (opt_.json_output) {
            out << rep.dump(2) << "\n";
        } else if (!opt_.quiet) {
            for (const auto& s : summary_) out << s << "\n";
            out << "report: " << path("report.json").string() << "\n";
        }
    }

private:
    std::string command_;
    json config_;
    std::uint64_t seed_;
    const Options& opt_;
    json results_ = json::object();
    std::vector<std::string> artifacts_;
    std::vector<std::string> summary_;
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline kerr::KerrMode mode_from_config(const json& cfg) {
    using detail_cli::num;
    const json& m = cfg.at("mode");
    const double f0 = num(m, "f0");
    if (!(num(m, "q_c") > 0.0) || !(num(m, "q_i") > 0.0)) {
        throw DomainError("mode: quality factors must be > 0");
    }
    kerr::KerrMode mode{f0, f0 / num(m, "q_c"), f0 / num(m, "q_i"), num(m, "kerr")};
    mode.validate();
    return mode;
}

inline void add_mode_results(Run& run, const kerr::KerrMode& mode) {
    run.results()["mode"] = mode;
    run.results()["kerr_sign_note"] =
        "only |K| is measured; the sign is a modeling choice (negative softens the mode)";
}

inline json operating_point_json(const kerr::PumpSearchResult& r, const kerr::KerrMode& mode) {
    const auto thr = kerr::bistability_threshold(mode);
    return {{"f_pump_hz", r.point.f_pump},
            {"detuning_hz", mode.f0 - r.point.f_pump},
            {"delta_crit_hz", thr.delta_crit},
            {"n_crit", thr.n_crit},
            {"pump_power_w", r.point.power},
            {"pump_power_dbm", watts_to_dbm(r.point.power)},
            {"n_pump", r.branch.n},
            {"peak_gain_db", r.profile.peak_gain_db},
            {"peak_freq_hz", r.profile.peak_freq},
            {"fwhm_hz", r.profile.fwhm},
            {"gbw_hz", r.profile.gbw},
            {"metrics_reliable", r.profile.reliable}};
}

inline void cmd_simulate_gain(Run& run) {
    const auto mode = mode_from_config(run.config());
    const json& s = run.config().at("simulate");
    const auto r = kerr::optimal_pump_search(mode, detail_cli::num(s, "target_gain_db"));
    add_mode_results(run, mode);
    run.results()["operating_point"] = operating_point_json(r, mode);
    const double half = 4.0 * mode.kappa() / std::sqrt(db_to_linear(r.profile.peak_gain_db));
    const auto prof = kerr::gain_profile(mode, r.state, r.branch, r.point.f_pump - half,
                                         r.point.f_pump + half,
                                         detail_cli::integer(s, "profile_points"));
    std::vector<double> g, gi;
    for (std::size_t i = 0; i < prof.freq.size(); ++i) {
        g.push_back(prof.gain_db(i));
        gi.push_back(prof.idler_gain_db(i));
    }
    run.table("gain.csv", {"freq_hz", "gain_db", "idler_gain_db"}, {prof.freq, g, gi},
              "signal and idler gain");
    run.say("operating point: f_pump " + detail_cli::fmt("%.6f GHz", r.point.f_pump / 1e9) +
            ", P_pump " + detail_cli::dbm(r.point.power));
    run.say("peak gain " + detail_cli::fmt("%.2f dB", r.profile.peak_gain_db) + ", FWHM " +
            detail_cli::fmt("%.3f MHz", r.profile.fwhm / 1e6) + ", GBW " +
            detail_cli::fmt("%.1f MHz", r.profile.gbw / 1e6));
}

inline void cmd_simulate_sweep(Run& run) {
    const auto mode = mode_from_config(run.config());
    const json& s = run.config().at("simulate");
    const json& sw = s.at("sweep");
    const auto r = kerr::optimal_pump_search(mode, detail_cli::num(s, "target_gain_db"));
    const double detuning = mode.f0 - r.point.f_pump;
    const auto turn = kerr::lower_turning_point(mode, detuning);
    if (!turn) throw NumericalError("sweep: operating detuning has no turning point");
    const int n = detail_cli::integer(sw, "points");
    const double a = detail_cli::num(sw, "from_fraction"), b = detail_cli::num(sw, "to_fraction");
    if (n < 2 || !(a > 0.0 && a < b && b < 1.0)) {
        throw ValidationError("sweep: need points >= 2 and 0 < from_fraction < to_fraction < 1");
    }
    std::vector<double> p_dbm, g_db;
    for (int k = 0; k < n; ++k) {
        const double drive = turn->drive * (a + (b - a) * k / (n - 1));
        const double n_p = kerr::steady_state_photon_numbers(mode, detuning, drive).front();
        p_dbm.push_back(watts_to_dbm(kerr::power_for_drive(mode, r.point.f_pump, drive)));
        g_db.push_back(linear_to_db(kerr::peak_gain_linear(mode, detuning, n_p)));
    }
    add_mode_results(run, mode);
    run.results()["f_pump_hz"] = r.point.f_pump;
    run.results()["turning_point_power_dbm"] =
        watts_to_dbm(kerr::power_for_drive(mode, r.point.f_pump, turn->drive));
    run.results()["max_peak_gain_db"] = g_db.back();
    run.table("sweep.csv", {"pump_power_dbm", "peak_gain_db"}, {p_dbm, g_db},
              "peak gain versus pump power");
    run.say("pump sweep at " + detail_cli::fmt("%.6f GHz", r.point.f_pump / 1e9) + ": " +
            std::to_string(n) + " points up to " + detail_cli::fmt("%.2f dB", g_db.back()));
}

inline void cmd_simulate_compression(Run& run) {
    const auto mode = mode_from_config(run.config());
    const json& s = run.config().at("simulate");
    const json& c = s.at("compression");
    const auto r = kerr::optimal_pump_search(mode, detail_cli::num(s, "target_gain_db"));
    const int n = detail_cli::integer(c, "points");
    const double lo = detail_cli::num(c, "p_start_dbm"), hi = detail_cli::num(c, "p_stop_dbm");
    if (n < 2 || !(lo < hi)) throw ValidationError("compression: need points >= 2 and start < stop");
    std::vector<double> powers;
    for (int k = 0; k < n; ++k) powers.push_back(dbm_to_watts(lo + (hi - lo) * k / (n - 1)));
    kerr::CompressionSettings cs;
    cs.skip_unconverged = c.at("skip_unconverged").get<bool>();
    const double f_signal = r.point.f_pump + detail_cli::num(c, "signal_offset_hz");
    const auto sweep =
        kerr::compression_sweep(mode, r.point.f_pump, r.point.power, f_signal, powers, cs);
    std::vector<double> p_dbm, g_db;
    for (const auto& p : sweep.points) {
        p_dbm.push_back(watts_to_dbm(p.signal_power));
        g_db.push_back(p.gain_db);
    }
    add_mode_results(run, mode);
    run.results()["operating_point"] = operating_point_json(r, mode);
    run.results()["small_signal_gain_db"] = sweep.small_signal_gain_db;
    run.results()["skipped_points"] = sweep.skipped;
    if (sweep.p1db) {
        run.results()["p1db_dbm"] = watts_to_dbm(*sweep.p1db);
        run.say("P1dB " + detail_cli::dbm(*sweep.p1db) + " at small-signal gain " +
                detail_cli::fmt("%.2f dB", sweep.small_signal_gain_db));
    } else {
        run.results()["p1db_dbm"] = nullptr;
        run.say("no 1 dB compression inside the swept range");
    }
    run.table("compression.csv", {"signal_power_dbm", "gain_db"}, {p_dbm, g_db},
              "gain versus signal power");
}

inline void cmd_simulate_snr(Run& run) {
    const json& s = run.config().at("simulate").at("snr");
    const double t_h = detail_cli::num(s, "t_hemt_k"), f = detail_cli::num(s, "f_hz");
    const double g_max = detail_cli::num(s, "g_max_db");
    const int n = detail_cli::integer(s, "points");
    if (n < 2 || !(g_max > 0.0)) throw ValidationError("snr: need points >= 2 and g_max_db > 0");
    std::vector<double> g, d;
    for (int k = 0; k < n; ++k) {
        g.push_back(g_max * k / (n - 1));
        d.push_back(kerr::snr_improvement(g.back(), t_h, f));
    }
    const double asym = kerr::snr_improvement_asymptote(t_h, f);
    run.results()["quantum_limit_k"] = kerr::quantum_limit_temperature(f);
    run.results()["asymptote_db"] = asym;
    run.results()["ratio_only_db"] = linear_to_db(t_h / kerr::quantum_limit_temperature(f));
    run.table("snr.csv", {"gain_db", "snr_improvement_db"}, {g, d}, "SNR improvement");
    run.say("quantum limit " + detail_cli::fmt("%.1f mK", 1e3 * kerr::quantum_limit_temperature(f)) +
            ", SNR improvement asymptote " + detail_cli::fmt("%.2f dB", asym));
}

inline std::string require_input(const Run& run) {
    const std::string in = run.config().at("fit").at("input").get<std::string>();
    if (in.empty()) throw ValidationError("fit: no input file (use --input or fit.input)");
    return in;
}

inline void cmd_fit_s21(Run& run) {
    const auto trace = io::read_complex_trace(require_input(run));
    const auto r = fit::resonator_reflection_fit(trace);
    run.results()["fit"] = r;
    run.results()["points"] = trace.freq.size();
    const auto p = fit::reflection_params(r);
    std::vector<double> re, im;
    for (double f : trace.freq) {
        const auto z = fit::reflection_model(f, p);
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    run.table("s21_fit.csv", {"freq_hz", "re", "im"}, {trace.freq, re, im}, "fitted S21");
    run.say("f0 " + detail_cli::fmt("%.9g Hz", r.value("f0")) + ", Q_i " +
            detail_cli::fmt("%.6g", r.value("Q_i")) + ", |Q_c| " +
            detail_cli::fmt("%.6g", r.value("Q_c")) + ", Q_total " +
            detail_cli::fmt("%.6g", r.value("Q_total")));
}

inline void cmd_fit_gain(Run& run) {
    const auto trace = io::read_gain_trace(require_input(run));
    const auto r = fit::double_lorentzian_fit(trace);
    run.results()["fit"] = r;
    run.results()["points"] = trace.freq.size();
    const std::array<double, 6> p{r.value("A1"), r.value("f1"), r.value("df1"),
                                  r.value("A2"), r.value("f2"), r.value("df2")};
    std::vector<double> model;
    for (double f : trace.freq) model.push_back(linear_to_db(fit::double_lorentzian(f, p)));
    run.table("gain_fit.csv", {"freq_hz", "gain_db"}, {trace.freq, model}, "double Lorentzian fit");
    run.say("component 1: " + detail_cli::fmt("%.2f dB", r.value("G1_db")) + ", FWHM " +
            detail_cli::fmt("%.4g Hz", r.value("df1")));
    if (!r.flagged("single_component")) {
        run.say("component 2: " + detail_cli::fmt("%.2f dB", r.value("G2_db")) + ", FWHM " +
                detail_cli::fmt("%.4g Hz", r.value("df2")));
    }
}

inline void cmd_fit_kerr(Run& run) {
    const auto pts = io::read_kerr_points(require_input(run));
    const auto r = fit::kerr_slope_fit(pts);
    run.results()["fit"] = r;
    run.say("K " + detail_cli::fmt("%.6g Hz/photon", r.value("K")) + " +- " +
            detail_cli::fmt("%.3g", r.at("K").std_error));
}

inline void cmd_calibrate_photon_number(Run& run) {
    using detail_cli::num;
    const json& c = run.config().at("calibrate");
    cal::TransmonCalibration tc{num(c, "kappa_hz"), num(c, "chi_hz"), num(c, "c_photons_per_mw"),
                                num(c, "f_r")};
    tc.validate();
    const double p_mw = dbm_to_watts(num(c, "p_sg_dbm")) * 1e3;
    const double n = tc.photons(p_mw);
    const double p_out = cal::cavity_output_power(tc.kappa_hz, tc.f_r, n);
    run.results()["photons"] = n;
    run.results()["cavity_output_power_dbm"] = p_out;
    run.results()["dephasing_rate_hz"] = cal::measurement_dephasing(tc.chi_hz, n, tc.kappa_hz);
    run.results()["systematic_db"] = cal::kLineBudgetSystematicDb;
    run.results()["convention"] = "P = 2 pi kappa_hz h f_r n (kappa_hz is a FWHM in Hz)";
    run.say("n = " + detail_cli::fmt("%.6g", n) + " photons, P_out = " +
            detail_cli::fmt("%.2f dBm", p_out));
}

inline cal::AmplifierChain chain_or(const json& j, cal::AmplifierChain fallback) {
    if (j.is_null()) return fallback;
    return j.get<cal::AmplifierChain>();
}

inline std::string budget_table(const cal::PowerReferral& r) {
    std::ostringstream o;
    o << std::left << std::setw(40) << "stage" << std::right << std::setw(12) << "in [dBm]"
      << std::setw(12) << "out [dBm]" << "  flag\n";
    for (const auto& l : r.levels) {
        o << std::left << std::setw(40) << l.name << std::right << std::fixed
          << std::setprecision(2) << std::setw(12) << l.input_dbm << std::setw(12) << l.output_dbm
          << (l.compressed ? "  COMPRESSED" : "") << "\n";
    }
    return o.str();
}

inline void cmd_calibrate_chain(Run& run) {
    using detail_cli::num;
    const json& c = run.config().at("calibrate").at("chain");
    const auto probe = chain_or(c.at("probe"), cal::probe_line());
    const auto pump = chain_or(c.at("pump"), cal::pump_line());
    const auto readout = chain_or(c.at("readout"), cal::readout_chain());
    probe.validate();
    pump.validate();
    readout.validate();
    const double f_pa = num(c, "pa_f_hz");
    cal::AmplifierChain pump_path = pump;
    pump_path.stages.push_back(cal::amplifier("parametric amplifier (pump reflected)", 0.0,
                                              kerr::quantum_limit_temperature(f_pa)));
    for (const auto& s : readout.stages) pump_path.stages.push_back(s);
    const auto ref = cal::referred_power(pump_path, num(c, "input_dbm"));

    cal::AmplifierChain noise_chain;
    noise_chain.stages.push_back(cal::amplifier("parametric amplifier", num(c, "pa_gain_db"),
                                                kerr::quantum_limit_temperature(f_pa)));
    for (const auto& s : readout.stages) noise_chain.stages.push_back(s);

    run.results()["probe_attenuation_db"] = cal::chain_attenuation(probe);
    run.results()["pump_attenuation_db"] = cal::chain_attenuation(pump);
    double pa_level = 0.0;
    for (const auto& l : ref.levels) {
        if (l.name.rfind("parametric amplifier", 0) == 0) pa_level = l.input_dbm;
    }
    run.results()["pump_at_pa_dbm"] = pa_level;
    run.results()["pump_referral"] = ref;
    run.results()["system_noise_temperature_k"] = cal::friis_noise_temperature(noise_chain);
    run.results()["readout_noise_temperature_k"] = cal::friis_noise_temperature(readout);
    run.results()["systematic_db"] = cal::kLineBudgetSystematicDb;
    const std::string table = budget_table(ref);
    run.text("budget.txt", table);
    run.say("probe line " + detail_cli::fmt("%.1f dB", cal::chain_attenuation(probe)) +
            ", pump at amplifier " + detail_cli::fmt("%.1f dBm", pa_level) + " (+-4 dB systematic)");
    run.say(table);
}

inline filter::FilterDesign design_from_config(const json& f) {
    filter::FilterDesign d;
    d.order = detail_cli::integer(f, "order");
    d.ripple_db = detail_cli::num(f, "ripple_db");
    d.cutoff_hz = detail_cli::num(f, "cutoff_hz");
    d.z0 = detail_cli::num(f, "z0");
    return d;
}

/// Returns false when an enabled check fails.
inline bool cmd_filter(Run& run, bool force_check) {
    const json& f = run.config().at("filter");
    const auto d = design_from_config(f);
    const auto proto = filter::chebyshev_prototype(d.order, d.ripple_db);
    const auto net = filter::denormalize_ladder(proto, d.cutoff_hz, d.z0);
    run.results()["prototype_g"] = proto.g;
    run.results()["network"] = net;
    run.results()["passband_ripple_db"] = filter::passband_ripple_db(net, d.cutoff_hz);

    const json& r = f.at("response");
    const int n = detail_cli::integer(r, "points");
    const double lo = detail_cli::num(r, "f_lo_hz"), hi = detail_cli::num(r, "f_hi_hz");
    if (n < 2 || !(lo > 0.0 && hi > lo)) throw ValidationError("filter.response: invalid grid");
    std::vector<double> fr, s21;
    for (int k = 0; k < n; ++k) {
        // Logarithmic grid.
        fr.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
        s21.push_back(filter::ladder_s21_db(net, fr.back()));
    }
    run.table("filter_response.csv", {"freq_hz", "s21_db"}, {fr, s21}, "filter |S21|");
    run.results()["response_above_lumped_limit"] = hi > filter::kLumpedModelLimitHz;

    const json& ck = f.at("check");
    bool ok = true;
    if (force_check || ck.at("enabled").get<bool>()) {
        const auto tc = filter::stopband_check_thickness(
            net, detail_cli::num(ck, "f_lo_hz"), detail_cli::num(ck, "f_hi_hz"),
            detail_cli::num(ck, "threshold_db"), detail_cli::num(f, "thickness_variation"));
        run.results()["check"] = {{"nominal", tc.nominal},
                                  {"thinner_dielectric", tc.thinner},
                                  {"thicker_dielectric", tc.thicker},
                                  {"pass", tc.pass()}};
        ok = tc.pass();
        run.say(std::string("stopband check ") + (ok ? "PASS" : "FAIL") + ": worst " +
                detail_cli::fmt("%.1f dB", tc.nominal.worst_db) + " at " +
                detail_cli::fmt("%.3f GHz", tc.nominal.worst_freq / 1e9) + " (nominal), " +
                detail_cli::fmt("%.1f dB", std::max(tc.thinner.worst_db, tc.thicker.worst_db)) +
                " worst over thickness");
        if (tc.nominal.above_lumped_limit) {
            run.say("warning: band extends above 10 GHz where the lumped model is not reliable");
        }
    }
    for (std::size_t i = 0; i < net.elements.size(); ++i) {
        const auto& e = net.elements[i];
        run.say((e.kind == filter::ElementKind::ShuntC ? "C" : "L") + std::to_string(i + 1) +
                " = " +
                (e.kind == filter::ElementKind::ShuntC ? detail_cli::fmt("%.4g pF", e.value * 1e12)
                                                       : detail_cli::fmt("%.4g nH", e.value * 1e9)));
    }
    return ok;
}

inline void cmd_synth(Run& run, const std::string& kind) {
    using detail_cli::integer;
    using detail_cli::num;
    const json& s = run.config().at("synth");
    std::mt19937_64 rng(run.seed());
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool all = kind == "all";
    bool any = false;

    if (all || kind == "s21") {
        any = true;
        const json& r = s.at("resonator");
        fit::ReflectionParams p;
        p.f_r = num(r, "f0");
        p.q_i = num(r, "q_i");
        p.q_c = num(r, "q_c");
        p.phi = num(r, "phi");
        p.amplitude = num(r, "amplitude");
        p.alpha = num(r, "alpha");
        p.tau = num(r, "tau");
        const double half = 0.5 * num(r, "span_linewidths") * p.f_r / p.q_loaded();
        auto t = fit::synthesize_reflection(p, p.f_r - half, p.f_r + half, integer(r, "points"));
        const double sigma = num(r, "noise_rel") * p.amplitude / std::sqrt(2.0);
        if (sigma > 0.0) {
            for (auto& z : t.s21) z += std::complex<double>(sigma * normal(rng), sigma * normal(rng));
        }
        run.results()["s21"] = {{"f0", p.f_r}, {"Q_i", p.q_i}, {"Q_c", p.q_c}, {"phi", p.phi},
                                {"Q_total", p.q_loaded()}, {"noise_rel", num(r, "noise_rel")}};
        run.table("s21.csv", {"freq_hz", "re", "im"},
                  [&] {
                      std::vector<double> re, im;
                      for (const auto& z : t.s21) {
                          re.push_back(z.real());
                          im.push_back(z.imag());
                      }
                      return std::vector<std::vector<double>>{t.freq, re, im};
                  }(),
                  "synthetic S21");
    }
    if (all || kind == "gain") {
        any = true;
        const json& g = s.at("gain");
        const auto mode = mode_from_config(run.config());
        const double target = num(run.config().at("simulate"), "target_gain_db");
        const auto op = kerr::optimal_pump_search(mode, target);
        const double half = num(g, "span_linewidths") * mode.kappa();
        const int n = integer(g, "points");
        const auto prof = kerr::gain_profile(mode, op.state, op.branch, op.point.f_pump - half,
                                             op.point.f_pump + half, n);
        std::vector<double> db;
        const double sd = num(g, "noise_db");
        for (std::size_t i = 0; i < prof.freq.size(); ++i) {
            db.push_back(prof.gain_db(i) + (sd > 0.0 ? sd * normal(rng) : 0.0));
        }
        run.results()["gain"] = {{"operating_point", operating_point_json(op, mode)},
                                 {"noise_db", sd}};
        run.table("gain.csv", {"freq_hz", "gain_db"}, {prof.freq, db}, "synthetic gain");
    }
    if (all || kind == "kerr") {
        any = true;
        const json& k = s.at("kerr");
        const int n = integer(k, "points");
        if (n < 2) throw ValidationError("synth.kerr.points must be >= 2");
        std::vector<double> np, fr;
        const double sd = num(k, "noise_hz");
        for (int i = 0; i < n; ++i) {
            np.push_back(num(k, "n_max") * i / (n - 1));
            fr.push_back(num(k, "f_r0") + num(k, "k_hz") * np.back() +
                         (sd > 0.0 ? sd * normal(rng) : 0.0));
        }
        run.results()["kerr"] = {{"K", num(k, "k_hz")}, {"f_r0", num(k, "f_r0")}, {"noise_hz", sd}};
        run.table("kerr.csv", {"n_photons", "freq_hz"}, {np, fr}, "resonance versus photons");
    }
    if (all || kind == "spectrum") {
        any = true;
        const json& sp = s.at("spectrum");
        const double f_sig = num(sp, "f_signal_hz"), span = num(sp, "span_hz");
        const int n = integer(sp, "points");
        const double rbw = num(sp, "rbw_hz"), t_h = num(sp, "t_hemt_k");
        const double g = db_to_linear(num(sp, "gain_db"));
        const double t_q = kerr::quantum_limit_temperature(f_sig);
        const double sd = num(sp, "noise_db");
        // Input-referred: the amplifier adds G T_QL, the following stage T_H.
        const double floor_off = watts_to_dbm(constants::boltzmann * (t_q + t_h) * rbw);
        const double floor_on = watts_to_dbm(constants::boltzmann * (g * t_q + t_h) * rbw / g);
        std::vector<double> f, off, on;
        const double step = span / (n - 1);
        const double f_lo = f_sig - std::round(0.5 * span / step) * step;
        std::size_t i_sig = 0;
        for (int i = 0; i < n; ++i) {
            f.push_back(f_lo + step * i);
            if (std::abs(f.back() - f_sig) < 0.5 * step) i_sig = static_cast<std::size_t>(i);
            off.push_back(floor_off + (sd > 0.0 ? sd * normal(rng) : 0.0));
            on.push_back(floor_on + (sd > 0.0 ? sd * normal(rng) : 0.0));
        }
        off[i_sig] = num(sp, "signal_dbm");
        on[i_sig] = num(sp, "signal_dbm");
        run.results()["spectrum"] = {
            {"model_snr_improvement_db", kerr::snr_improvement(num(sp, "gain_db"), t_h, f_sig)},
            {"f_signal_hz", f[i_sig]}};
        run.table("spectrum_off.csv", {"freq_hz", "power_dbm"}, {f, off}, "undriven spectrum");
        run.table("spectrum_on.csv", {"freq_hz", "power_dbm"}, {f, on}, "driven spectrum");
    }
    if (!any) throw ValidationError("synth: unknown kind '" + kind + "'");
    run.say("synthetic data written to " + run.path("").string());
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline std::uint64_t resolve_seed(const Options& opt) {
    if (opt.seed) return *opt.seed;
    if (const char* env = std::getenv(kSeedEnv)) {
        std::uint64_t v = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(std::string(kSeedEnv) + " is not a non-negative integer: '" +
                                  env + "'");
        }
        return v;
    }
    return 0;
}

inline json build_config(const Options& opt) {
    json cfg = default_config();
    if (!opt.config_path.empty()) {
        const std::string text = io::read_text_file(opt.config_path);
        json user;
        try {
            user = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ValidationError("config '" + opt.config_path + "': " + e.what());
        }
        if (!user.is_object()) throw ValidationError("config must be a JSON object");
        detail_cli::check_known_keys(user, cfg, "");
        detail_cli::merge(cfg, user);
    }
    for (const auto& s : opt.sets) detail_cli::apply_set(cfg, s);
    return cfg;
}

/// Runs the tool with the given arguments; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kerr parametric amplifier modeling and analysis"};
    app.set_version_flag("--version", kVersion);
    Options opt;
    app.add_option("--config", opt.config_path, "JSON config file");
    app.add_option("--set", opt.sets, "override a config value, key.path=value (repeatable)");
    app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", opt.seed, std::string("random seed (default: $") + kSeedEnv + " or 0)");
    app.add_flag("--plot", opt.plot, "write an SVG plot for every CSV");
    app.add_flag("--quiet", opt.quiet, "no summary on stdout");
    app.add_flag("--json", opt.json_output, "print the JSON report on stdout");
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "amplifier forward model");
    sim->require_subcommand(1);
    auto* sim_gain = sim->add_subcommand("gain", "gain profile at the optimal pump point");
    auto* sim_sweep = sim->add_subcommand("sweep", "peak gain versus pump power");
    auto* sim_comp = sim->add_subcommand("compression", "gain versus signal power and P1dB");
    auto* sim_snr = sim->add_subcommand("snr", "SNR improvement versus gain");

    auto* fitc = app.add_subcommand("fit", "fit measured or synthetic traces");
    fitc->require_subcommand(1);
    auto* fit_s21 = fitc->add_subcommand("s21", "reflection resonator fit (freq_hz,re,im)");
    auto* fit_gain = fitc->add_subcommand("gain", "double Lorentzian gain fit (freq_hz,gain_db)");
    auto* fit_kerr = fitc->add_subcommand("kerr", "Kerr slope fit (n_photons,freq_hz)");
    for (auto* c : {fit_s21, fit_gain, fit_kerr}) {
        c->add_option("--input,-i", opt.input, "input CSV");
    }

    auto* calc = app.add_subcommand("calibrate", "line budgets and photon-number calibration");
    calc->require_subcommand(1);
    auto* cal_pn = calc->add_subcommand("photon-number", "photons and cavity output power");
    auto* cal_chain = calc->add_subcommand("chain", "attenuation, power referral and noise");

    auto* filt = app.add_subcommand("filter", "gate-line Chebyshev filter");
    filt->require_subcommand(1);
    auto* filt_design = filt->add_subcommand("design", "synthesize and evaluate the filter");
    auto* filt_check = filt->add_subcommand("check", "stopband check with thickness variation");
    for (auto* c : {filt_design, filt_check}) {
        c->add_option("--order", opt.filter_order, "filter order");
        c->add_option("--ripple-db", opt.ripple_db, "passband ripple in dB");
        c->add_option("--cutoff-ghz", opt.cutoff_ghz, "cutoff frequency in GHz");
        c->add_option("--z0", opt.z0, "system impedance in Ohm");
        c->add_option("--check", opt.check_spec, "stopband check F_LO_GHZ:F_HI_GHZ:THRESHOLD_DB");
    }

    auto* synth = app.add_subcommand("synth", "write synthetic datasets");
    synth->add_option("--kind", opt.synth_kind, "s21|gain|kerr|spectrum|all");

    for (auto* c : {sim, sim_gain, sim_sweep, sim_comp, sim_snr, fitc, fit_s21, fit_gain, fit_kerr,
                    calc, cal_pn, cal_chain, filt, filt_design, filt_check, synth}) {
        c->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (opt.filter_order) opt.sets.push_back("filter.order=" + std::to_string(*opt.filter_order));
        if (opt.ripple_db) opt.sets.push_back("filter.ripple_db=" + io::format_double(*opt.ripple_db));
        if (opt.cutoff_ghz) {
            opt.sets.push_back("filter.cutoff_hz=" + io::format_double(*opt.cutoff_ghz * 1e9));
        }
        if (opt.z0) opt.sets.push_back("filter.z0=" + io::format_double(*opt.z0));
        if (!opt.check_spec.empty()) {
            std::vector<double> parts;
            std::stringstream ss(opt.check_spec);
            std::string item;
            while (std::getline(ss, item, ':')) {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
                if (ec != std::errc() || ptr != item.data() + item.size()) {
                    throw ValidationError("--check expects F_LO:F_HI:DB, got '" + opt.check_spec + "'");
                }
                parts.push_back(v);
            }
            if (parts.size() != 3) {
                throw ValidationError("--check expects F_LO:F_HI:DB, got '" + opt.check_spec + "'");
            }
            opt.sets.push_back("filter.check.enabled=true");
            opt.sets.push_back("filter.check.f_lo_hz=" + io::format_double(parts[0] * 1e9));
            opt.sets.push_back("filter.check.f_hi_hz=" + io::format_double(parts[1] * 1e9));
            opt.sets.push_back("filter.check.threshold_db=" + io::format_double(parts[2]));
        }

        json cfg = build_config(opt);
        if (!opt.input.empty()) cfg["fit"]["input"] = opt.input;
        if (!opt.synth_kind.empty()) cfg["synth"]["kind"] = opt.synth_kind;
        const std::uint64_t seed = resolve_seed(opt);
        std::string name;
        for (const CLI::App* c = &app; !c->get_subcommands().empty();) {
            c = c->get_subcommands().front();
            name += (name.empty() ? "" : " ") + c->get_name();
        }
        Run r(name, cfg, seed, opt);
        bool ok = true;
        if (sim_gain->parsed()) cmd_simulate_gain(r);
        else if (sim_sweep->parsed()) cmd_simulate_sweep(r);
        else if (sim_comp->parsed()) cmd_simulate_compression(r);
        else if (sim_snr->parsed()) cmd_simulate_snr(r);
        else if (fit_s21->parsed()) cmd_fit_s21(r);
        else if (fit_gain->parsed()) cmd_fit_gain(r);
        else if (fit_kerr->parsed()) cmd_fit_kerr(r);
        else if (cal_pn->parsed()) cmd_calibrate_photon_number(r);
        else if (cal_chain->parsed()) cmd_calibrate_chain(r);
        else if (filt_design->parsed()) ok = cmd_filter(r, false);
        else if (filt_check->parsed()) ok = cmd_filter(r, true);
        else if (synth->parsed()) cmd_synth(r, cfg.at("synth").at("kind").get<std::string>());
        r.finish(out);
        return ok ? kExitOk : kExitCheckFailed;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "invalid config: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ContractViolation& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}

}  // namespace paramp::cli

#endif  // PARAMP_CLI_HPP
