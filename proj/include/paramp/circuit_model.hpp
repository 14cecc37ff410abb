#ifndef PARAMP_CIRCUIT_MODEL_HPP
#define PARAMP_CIRCUIT_MODEL_HPP

#include <cmath>
#include <string>
#include <vector>

#include "paramp/detail/roots.hpp"
#include "paramp/error.hpp"
#include "paramp/units.hpp"

/// Static circuit physics of the nanowire-shunted quarter-wave resonator.
///
/// The resonator is an ideal lossless transmission line of characteristic
/// impedance Z0 = sqrt(L0/C0) and unloaded quarter-wave frequency
/// f_q = 1/(4 sqrt(L0 C0)), open at the coupling end and shorted to ground
/// through the nanowire inductance L. Looking into the short, the line
/// impedance j Z0 tan(theta) must cancel the inductor, which gives the
/// resonance condition
///
///     Z0 cot(theta) = 2 pi f L,    theta = (pi/2) f / f_q.
///
/// The coupling capacitor is ignored for the internal mode frequency.
/// All frequencies are ordinary (Hz).
namespace paramp::circuit {

struct LoadedResonator {
    double c_line_total = 511e-15;     // F
    double l_line_total = 1.07e-9;     // H
    double c_coupling = 55e-15;        // F
    double l_nanowire_zero = 0.79e-9;  // H, at the gate reference and B = 0
    double port_impedance = 50.0;      // Ohm

    void validate() const {
        if (!(c_line_total > 0.0) || !(l_line_total > 0.0) || !(c_coupling > 0.0) ||
            !(l_nanowire_zero > 0.0) || !(port_impedance > 0.0)) {
            throw DomainError("LoadedResonator: all capacitances, inductances and the port "
                              "impedance must be strictly positive");
        }
        const double z0 = characteristic_impedance();
        if (!std::isfinite(z0) || z0 <= 0.0) {
            throw DomainError("LoadedResonator: characteristic impedance is not finite");
        }
    }

    double characteristic_impedance() const { return std::sqrt(l_line_total / c_line_total); }

    double quarter_wave_frequency() const {
        return 1.0 / (4.0 * std::sqrt(l_line_total * c_line_total));
    }
};

/// L_NW / (L_NW + L_line).
inline double inductance_fraction(double l_nw, double l_line) {
    if (!(l_nw > 0.0) || !(l_line > 0.0)) {
        throw DomainError("inductance_fraction: inductances must be > 0");
    }
    return l_nw / (l_nw + l_line);
}

/// Critical current of a single junction with the same linear inductance,
/// Phi0 / (2 pi L).
inline double equivalent_critical_current(double l_nw) {
    if (!(l_nw > 0.0)) throw DomainError("equivalent_critical_current: inductance must be > 0");
    return constants::flux_quantum / (constants::two_pi * l_nw);
}

/// Z0 cot(theta) - 2 pi f L. Positive just above each pole of cot, crosses
/// zero once per branch.
inline double resonance_residual(const LoadedResonator& res, double l_nw_effective, double f) {
    const double theta = 0.5 * constants::pi * f / res.quarter_wave_frequency();
    return res.characteristic_impedance() / std::tan(theta) -
           constants::two_pi * f * l_nw_effective;
}

inline constexpr double kModeScanStep = 10e6;  // Hz

/// First `n_modes` resonances of the loaded line, strictly increasing.
///
/// The k-th root lies on the cot branch (2k f_q, (2k+1) f_q]. Each branch is
/// scanned upward from its pole on a fixed 10 MHz grid until the residual
/// changes sign, then refined by safeguarded bisection/secant.
inline std::vector<double> loaded_mode_frequencies(const LoadedResonator& res,
                                                   double l_nw_effective, int n_modes) {
    if (n_modes < 1) throw DomainError("loaded_mode_frequencies: n_modes must be >= 1");
    if (!(l_nw_effective >= 0.0) || !std::isfinite(l_nw_effective)) {
        throw DomainError("loaded_mode_frequencies: effective inductance must be >= 0");
    }
    res.validate();
    const double fq = res.quarter_wave_frequency();
    const double z0 = res.characteristic_impedance();
    auto g = [&](double f) { return resonance_residual(res, l_nw_effective, f); };

    std::vector<double> roots;
    roots.reserve(static_cast<std::size_t>(n_modes));
    for (int k = 0; k < n_modes; ++k) {
        const double pole = 2.0 * k * fq;
        const double branch_end = (2.0 * k + 1.0) * fq;
        // g is +inf at the pole; start a hair above it.
        double lo = pole + 1e-9 * fq;
        double hi = std::floor(pole / kModeScanStep + 1.0) * kModeScanStep;
        while (hi < branch_end && g(hi) > 0.0) {
            lo = hi;
            hi += kModeScanStep;
        }
        hi = std::min(hi, branch_end);
        if (!(g(lo) > 0.0) || g(hi) > 0.0) {
            throw NumericalError("loaded_mode_frequencies: failed to bracket mode " +
                                 std::to_string(k) + " in " + detail::format_bracket(lo, hi));
        }
        const double f = detail::bracketed_root(g, lo, hi, 1e-15 * hi);
        if (!(std::abs(g(f)) < 1e-6 * z0)) {
            throw NumericalError("loaded_mode_frequencies: residual too large for mode " +
                                 std::to_string(k) + " in " + detail::format_bracket(lo, hi));
        }
        roots.push_back(f);
    }
    return roots;
}

inline double fundamental_frequency(const LoadedResonator& res, double l_nw_effective) {
    return loaded_mode_frequencies(res, l_nw_effective, 1).front();
}

/// Nanowire inductance that places the fundamental at `target_hz`.
/// The fundamental decreases monotonically in L, from f_q at L = 0.
inline double inductance_for_fundamental(const LoadedResonator& res, double target_hz) {
    const double fq = res.quarter_wave_frequency();
    if (!(target_hz > 0.0) || !(target_hz < fq)) {
        throw DomainError("inductance_for_fundamental: target must lie in (0, f_quarter_wave)");
    }
    // Closed form from the resonance condition itself.
    const double theta = 0.5 * constants::pi * target_hz / fq;
    return res.characteristic_impedance() / (std::tan(theta) * constants::two_pi * target_hz);
}

/// Scaled logistic map of gate voltage onto a frequency shift.
///
/// shift(v) = span * (s(v) - s(v_low)) / (s(v_high) - s(v_low)),
/// s(v) = 1 / (1 + exp(-(v - v_mid) / v_width)).
struct GateMap {
    double v_low = -3.0;                  // V
    double v_high = 7.0;                  // V
    double total_frequency_span = 15e6;   // Hz
    double v_mid = 2.0;                   // V, logistic midpoint
    double v_width = 2.0;                 // V, logistic width

    void validate() const {
        if (!(v_low < v_high)) throw DomainError("GateMap: v_low must be < v_high");
        if (!(v_width > 0.0)) throw DomainError("GateMap: v_width must be > 0");
        if (!(total_frequency_span >= 0.0)) {
            throw DomainError("GateMap: total_frequency_span must be >= 0");
        }
    }

    double shift(double v_g) const {
        validate();
        if (!(v_g >= v_low && v_g <= v_high)) {
            throw OutOfRangeError("gate voltage " + std::to_string(v_g) +
                                  " V outside the usable range [" + std::to_string(v_low) + ", " +
                                  std::to_string(v_high) + "] V");
        }
        if (v_g == v_low) return 0.0;
        if (v_g == v_high) return total_frequency_span;
        auto s = [&](double v) { return 1.0 / (1.0 + std::exp(-(v - v_mid) / v_width)); };
        const double s_lo = s(v_low);
        return total_frequency_span * (s(v_g) - s_lo) / (s(v_high) - s_lo);
    }
};

/// Nanowire inductance at a gate voltage: the value that moves the loaded
/// fundamental by the mapped shift relative to its value at v_low.
inline double gate_inductance(const GateMap& map, const LoadedResonator& res, double v_g) {
    const double shift = map.shift(v_g);
    const double f_ref = fundamental_frequency(res, res.l_nanowire_zero);
    if (shift == 0.0) return res.l_nanowire_zero;
    return inductance_for_fundamental(res, f_ref + shift);
}

inline double gate_frequency(const GateMap& map, const LoadedResonator& res, double v_g) {
    const double shift = map.shift(v_g);
    if (shift == 0.0) return fundamental_frequency(res, res.l_nanowire_zero);
    return fundamental_frequency(res, gate_inductance(map, res, v_g));
}

/// Quadratic gap suppression Delta(B) = Delta0 (1 - (B/B*)^2); the kinetic
/// inductance scales as 1/Delta, so L(B) = L(0) / (1 - (B/B*)^2).
struct FieldMap {
    double b_star = 1.0;                // T
    double reference_shift = -170e6;    // Hz, shift at calibration_field
    double calibration_field = 0.5;     // T

    void validate() const {
        if (!(b_star > 0.0)) throw DomainError("FieldMap: b_star must be > 0");
    }

    double suppression(double b) const {
        validate();
        if (!(std::abs(b) < b_star)) {
            throw DomainError("field " + std::to_string(b) + " T at or beyond b_star = " +
                              std::to_string(b_star) + " T (gap closed)");
        }
        const double r = b / b_star;
        return 1.0 - r * r;
    }
};

inline double field_inductance(const FieldMap& map, const LoadedResonator& res, double b) {
    return res.l_nanowire_zero / map.suppression(b);
}

/// f(B) - f(0); zero at B = 0, even in B, non-positive.
inline double field_frequency_shift(const FieldMap& map, const LoadedResonator& res,
                                    double b_parallel) {
    const double s = map.suppression(b_parallel);
    if (s == 1.0) return 0.0;
    const double f0 = fundamental_frequency(res, res.l_nanowire_zero);
    return fundamental_frequency(res, res.l_nanowire_zero / s) - f0;
}

/// FieldMap whose b_star reproduces `shift_hz` (< 0) at `field_t`.
inline FieldMap calibrate_field_map(const LoadedResonator& res, double field_t, double shift_hz) {
    if (!(field_t != 0.0) || !(shift_hz < 0.0)) {
        throw DomainError("calibrate_field_map: need a non-zero field and a negative shift");
    }
    const double f0 = fundamental_frequency(res, res.l_nanowire_zero);
    if (!(f0 + shift_hz > 0.0)) throw DomainError("calibrate_field_map: shift exceeds f0");
    const double l_needed = inductance_for_fundamental(res, f0 + shift_hz);
    const double s = res.l_nanowire_zero / l_needed;  // 1 - (B/B*)^2
    FieldMap map;
    map.b_star = std::abs(field_t) / std::sqrt(1.0 - s);
    map.reference_shift = shift_hz;
    map.calibration_field = field_t;
    return map;
}

}  // namespace paramp::circuit

#endif  // PARAMP_CIRCUIT_MODEL_HPP
