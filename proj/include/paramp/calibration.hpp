#ifndef PARAMP_CALIBRATION_HPP
#define PARAMP_CALIBRATION_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "paramp/error.hpp"
#include "paramp/units.hpp"

namespace paramp::cal {

/// Systematic uncertainty carried by every line budget: component-wise and
/// end-to-end calibrations of the same line disagree by about this much.
inline constexpr double kLineBudgetSystematicDb = 4.0;

inline constexpr double kColdStageK = 0.02;
inline constexpr double kRoomTemperatureK = 293.0;

/// One element of a microwave line. Amplifiers carry a noise temperature,
/// passive elements a physical temperature; exactly one must be set.
struct Stage {
    std::string name;
    double gain_db = 0.0;  // negative for attenuation
    std::optional<double> noise_temperature_k;
    std::optional<double> physical_temperature_k;
    std::optional<double> p1db_input_dbm;

    bool is_amplifier() const { return noise_temperature_k.has_value(); }

    void validate() const {
        if (!std::isfinite(gain_db)) throw DomainError("stage '" + name + "': gain must be finite");
        if (noise_temperature_k.has_value() == physical_temperature_k.has_value()) {
            throw ValidationError("stage '" + name +
                                  "': set exactly one of noise_temperature_k and "
                                  "physical_temperature_k");
        }
        if (noise_temperature_k && !(*noise_temperature_k >= 0.0)) {
            throw DomainError("stage '" + name + "': noise temperature must be >= 0");
        }
        if (physical_temperature_k && !(*physical_temperature_k >= 0.0)) {
            throw DomainError("stage '" + name + "': physical temperature must be >= 0");
        }
    }
};

inline Stage attenuator(std::string name, double loss_db, double t_phys = kColdStageK) {
    Stage s;
    s.name = std::move(name);
    s.gain_db = -std::abs(loss_db);
    s.physical_temperature_k = t_phys;
    return s;
}

inline Stage amplifier(std::string name, double gain_db, double t_noise,
                       std::optional<double> p1db_in = std::nullopt) {
    Stage s;
    s.name = std::move(name);
    s.gain_db = gain_db;
    s.noise_temperature_k = t_noise;
    s.p1db_input_dbm = p1db_in;
    return s;
}

struct AmplifierChain {
    std::vector<Stage> stages;

    void validate() const {
        if (stages.empty()) throw ValidationError("amplifier chain: need at least one stage");
        for (const auto& s : stages) s.validate();
    }
};

/// Sum of stage gains in dB. Neumaier-compensated so that decimal stage
/// values add up to the decimal total.
inline double chain_attenuation(const AmplifierChain& chain) {
    double sum = 0.0, comp = 0.0;
    for (const auto& s : chain.stages) {
        const double t = sum + s.gain_db;
        if (std::abs(sum) >= std::abs(s.gain_db)) {
            comp += (sum - t) + s.gain_db;
        } else {
            comp += (s.gain_db - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

struct StageLevel {
    std::string name;
    double input_dbm;
    double output_dbm;
    bool compressed;  // input >= p1db_input_dbm
};

struct PowerReferral {
    std::vector<StageLevel> levels;
    double output_dbm;
    std::vector<std::string> compressed_stages;
    double systematic_db = kLineBudgetSystematicDb;

    bool any_compressed() const { return !compressed_stages.empty(); }
};

/// Power at every stage for a tone entering the chain at `input_dbm`.
inline PowerReferral referred_power(const AmplifierChain& chain, double input_dbm) {
    PowerReferral out;
    double level = input_dbm;
    double comp = 0.0;  // compensated running sum, as in chain_attenuation
    for (const auto& s : chain.stages) {
        StageLevel l;
        l.name = s.name;
        l.input_dbm = level + comp;
        l.compressed = s.p1db_input_dbm.has_value() && l.input_dbm >= *s.p1db_input_dbm;
        const double t = level + s.gain_db;
        if (std::abs(level) >= std::abs(s.gain_db)) {
            comp += (level - t) + s.gain_db;
        } else {
            comp += (s.gain_db - t) + level;
        }
        level = t;
        l.output_dbm = level + comp;
        if (l.compressed) out.compressed_stages.push_back(s.name);
        out.levels.push_back(l);
    }
    out.output_dbm = level + comp;
    return out;
}

/// Input-referred noise temperature of the cascade,
/// T_sys = sum_k T_k / prod_{j<k} G_j, with a passive stage of linear gain
/// G at physical temperature T contributing T_k = (1/G - 1) T.
inline double friis_noise_temperature(const AmplifierChain& chain) {
    chain.validate();
    bool has_amp = false;
    for (const auto& s : chain.stages) has_amp = has_amp || s.is_amplifier();
    if (!has_amp) throw ValidationError("friis_noise_temperature: chain has no amplifier stage");
    double t_sys = 0.0;
    double g_before = 1.0;
    for (const auto& s : chain.stages) {
        const double g = db_to_linear(s.gain_db);
        const double t_k =
            s.is_amplifier() ? *s.noise_temperature_k : (1.0 / g - 1.0) * *s.physical_temperature_k;
        t_sys += t_k / g_before;
        g_before *= g;
    }
    return t_sys;
}

// ---------------------------------------------------------------------------
// Transmon-based photon-number calibration
// ---------------------------------------------------------------------------

struct TransmonCalibration {
    double kappa_hz = 11.34e6;        // readout resonator FWHM
    double chi_hz = 1.33e6;           // dispersive shift
    double c_photons_per_mw = 5.65;   // n = c P
    double f_r = 5.862e9;             // readout resonator frequency

    void validate() const {
        if (!(kappa_hz > 0.0)) throw DomainError("TransmonCalibration: kappa_hz must be > 0");
        if (!(c_photons_per_mw >= 0.0)) {
            throw DomainError("TransmonCalibration: conversion factor must be >= 0");
        }
    }

    double photons(double power_mw) const { return c_photons_per_mw * power_mw; }
};

/// Gamma_phi = 8 chi^2 n / kappa.
inline double measurement_dephasing(double chi_hz, double n, double kappa_hz) {
    if (!(kappa_hz > 0.0)) throw DomainError("measurement_dephasing: kappa must be > 0");
    return 8.0 * chi_hz * chi_hz * n / kappa_hz;
}

struct DispersiveCalibration {
    double chi_hz;
    double c_photons_per_mw;
};

/// chi and the power-to-photon conversion from the two slopes of a Ramsey
/// power sweep: dephasing rate and qubit frequency shift (2 chi n) versus
/// drive power.
inline DispersiveCalibration dispersive_shift_calibration(double slope_gamma_phi_per_mw,
                                                          double slope_delta_fq_per_mw,
                                                          double kappa_hz) {
    if (!std::isfinite(slope_gamma_phi_per_mw) || !std::isfinite(slope_delta_fq_per_mw)) {
        throw DomainError("dispersive_shift_calibration: slopes must be finite");
    }
    if (slope_delta_fq_per_mw == 0.0) {
        throw DomainError("dispersive_shift_calibration: zero frequency-shift slope");
    }
    if (!(kappa_hz > 0.0)) throw DomainError("dispersive_shift_calibration: kappa must be > 0");
    const double chi = 0.25 * kappa_hz * slope_gamma_phi_per_mw / slope_delta_fq_per_mw;
    if (chi == 0.0) throw DomainError("dispersive_shift_calibration: zero dephasing slope");
    return {chi, slope_delta_fq_per_mw / (2.0 * chi)};
}

/// Power leaving the cavity for n photons, in dBm. kappa_hz is a FWHM in
/// Hz; the energy decay rate is 2 pi kappa_hz, hence
/// P = 2 pi kappa_hz h f_r n.
inline double cavity_output_power_watts(double kappa_hz, double f_r, double n) {
    if (!(kappa_hz >= 0.0) || !(f_r >= 0.0) || !(n >= 0.0)) {
        throw DomainError("cavity_output_power: inputs must be >= 0");
    }
    return constants::two_pi * kappa_hz * constants::planck * f_r * n;
}

inline double cavity_output_power(double kappa_hz, double f_r, double n) {
    return watts_to_dbm(cavity_output_power_watts(kappa_hz, f_r, n));
}

inline double kappa_from_fwhm(double f_r, double q_total) {
    if (!(q_total > 0.0)) throw DomainError("kappa_from_fwhm: q_total must be > 0");
    return f_r / q_total;
}

struct TransmonFrequency {
    double f_q;                      // Hz
    std::optional<std::string> warning;
};

inline constexpr double kTransmonMinRatio = 10.0;

/// f_q = sqrt(8 E_c E_J) - E_c (energies as frequencies). Outside the
/// transmon regime (E_J/E_c < 10) the value is still returned, with a
/// warning.
inline TransmonFrequency transmon_frequency(double ej_hz, double ec_hz) {
    if (!(ej_hz > 0.0) || !(ec_hz > 0.0)) {
        throw DomainError("transmon_frequency: E_J and E_c must be > 0");
    }
    TransmonFrequency out{std::sqrt(8.0 * ec_hz * ej_hz) - ec_hz, std::nullopt};
    if (ej_hz / ec_hz < kTransmonMinRatio) {
        out.warning = "E_J/E_c = " + std::to_string(ej_hz / ec_hz) +
                      " below 10; transmon approximation not valid";
    }
    return out;
}

/// Inverse of transmon_frequency for fixed E_c.
inline double transmon_josephson_energy(double f_q, double ec_hz) {
    if (!(f_q > 0.0) || !(ec_hz > 0.0)) {
        throw DomainError("transmon_josephson_energy: f_q and E_c must be > 0");
    }
    const double s = f_q + ec_hz;
    return s * s / (8.0 * ec_hz);
}

// ---------------------------------------------------------------------------
// Reference lines of the measured setup
// ---------------------------------------------------------------------------

/// Probe line from the network analyzer to the amplifier input.
inline AmplifierChain probe_line() {
    return {{attenuator("cold attenuation", 50.0, kColdStageK),
             attenuator("directional couplers", 40.0, kColdStageK),
             attenuator("eccosorb filters", 3.3, kColdStageK),
             attenuator("room-temperature cables", 3.2, kRoomTemperatureK),
             attenuator("low-pass filter, circulator, cables", 2.5, kColdStageK)}};
}

/// Pump line: the probe line with one directional coupler bypassed.
inline AmplifierChain pump_line() { return {{attenuator("pump line", 78.9, kColdStageK)}}; }

/// Output chain after the parametric amplifier.
inline AmplifierChain readout_chain() {
    return {{attenuator("amplifier to HEMT", 1.3, kColdStageK),
             amplifier("cryogenic HEMT", 40.0, 2.2, -48.0),
             amplifier("room-temperature HEMT", 30.7, 75.0, -42.0)}};
}

}  // namespace paramp::cal

#endif  // PARAMP_CALIBRATION_HPP
