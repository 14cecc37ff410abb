#ifndef PARAMP_FILTER_SYNTH_HPP
#define PARAMP_FILTER_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "paramp/error.hpp"
#include "paramp/units.hpp"

namespace paramp::filter {

/// Low-pass Chebyshev prototype: element values g_1..g_n followed by the
/// normalized load g_{n+1} (g_0 = 1 is the source).
struct Prototype {
    int order = 0;
    double ripple_db = 0.0;
    std::vector<double> g;  // size order + 1, last entry is the load

    double load() const { return g.back(); }
};

inline Prototype chebyshev_prototype(int order, double ripple_db) {
    if (order < 1) throw DomainError("chebyshev_prototype: order must be >= 1");
    if (!(ripple_db > 0.0)) throw DomainError("chebyshev_prototype: ripple must be > 0 dB");
    const double beta = std::log(1.0 / std::tanh(ripple_db / (40.0 / std::log(10.0))));
    const double gamma = std::sinh(beta / (2.0 * order));
    std::vector<double> a(order + 1), b(order + 1);
    for (int k = 1; k <= order; ++k) {
        a[k] = std::sin((2.0 * k - 1.0) * constants::pi / (2.0 * order));
        const double s = std::sin(k * constants::pi / order);
        b[k] = gamma * gamma + s * s;
    }
    Prototype p;
    p.order = order;
    p.ripple_db = ripple_db;
    p.g.resize(static_cast<std::size_t>(order) + 1);
    p.g[0] = 2.0 * a[1] / gamma;
    for (int k = 2; k <= order; ++k) {
        p.g[k - 1] = 4.0 * a[k - 1] * a[k] / (b[k - 1] * p.g[k - 2]);
    }
    if (order % 2 == 1) {
        p.g[order] = 1.0;
    } else {
        const double c = 1.0 / std::tanh(beta / 4.0);
        p.g[order] = c * c;
    }
    return p;
}

enum class ElementKind { ShuntC, SeriesL };

struct Element {
    ElementKind kind;
    double value;  // F or H
};

struct LadderNetwork {
    std::vector<Element> elements;
    double source_impedance = 50.0;  // Ohm
    double load_impedance = 50.0;    // Ohm

    void validate() const {
        if (!(source_impedance > 0.0) || !(load_impedance > 0.0)) {
            throw DomainError("LadderNetwork: terminations must be > 0");
        }
        for (const auto& e : elements) {
            if (!(e.value > 0.0)) throw DomainError("LadderNetwork: element values must be > 0");
        }
    }

    /// Every capacitor multiplied by `factor` (parallel-plate C ~ 1/d).
    LadderNetwork with_capacitance_scaled(double factor) const {
        LadderNetwork out = *this;
        for (auto& e : out.elements) {
            if (e.kind == ElementKind::ShuntC) e.value *= factor;
        }
        return out;
    }

    /// Impedance scaling: L and the terminations times s, C divided by s.
    LadderNetwork impedance_scaled(double s) const {
        LadderNetwork out = *this;
        for (auto& e : out.elements) e.value = e.kind == ElementKind::ShuntC ? e.value / s : e.value * s;
        out.source_impedance *= s;
        out.load_impedance *= s;
        return out;
    }
};

/// Shunt-first ladder: odd positions are shunt capacitors, even positions
/// series inductors. The load is z0 g_{n+1} after a shunt element and
/// z0 / g_{n+1} after a series element.
inline LadderNetwork denormalize_ladder(const Prototype& proto, double f_cutoff, double z0) {
    if (!(f_cutoff > 0.0)) throw DomainError("denormalize_ladder: cutoff must be > 0");
    if (!(z0 > 0.0)) throw DomainError("denormalize_ladder: z0 must be > 0");
    const double w = constants::two_pi * f_cutoff;
    LadderNetwork net;
    net.source_impedance = z0;
    const int n = proto.order;
    for (int k = 0; k < n; ++k) {
        const double g = proto.g[static_cast<std::size_t>(k)];
        if (k % 2 == 0) {
            net.elements.push_back({ElementKind::ShuntC, g / (w * z0)});
        } else {
            net.elements.push_back({ElementKind::SeriesL, g * z0 / w});
        }
    }
    net.load_impedance = (n % 2 == 1) ? z0 * proto.load() : z0 / proto.load();
    return net;
}

using Abcd = std::array<std::complex<double>, 4>;  // A, B, C, D

inline Abcd abcd_multiply(const Abcd& x, const Abcd& y) {
    return {x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2],
            x[2] * y[1] + x[3] * y[3]};
}

inline Abcd ladder_abcd(const LadderNetwork& net, double freq) {
    using namespace std::complex_literals;
    const double w = constants::two_pi * freq;
    Abcd m{1.0, 0.0, 0.0, 1.0};
    for (const auto& e : net.elements) {
        const Abcd el = e.kind == ElementKind::ShuntC
                            ? Abcd{1.0, 0.0, 1i * w * e.value, 1.0}
                            : Abcd{1.0, 1i * w * e.value, 0.0, 1.0};
        m = abcd_multiply(m, el);
    }
    return m;
}

inline std::complex<double> ladder_s21(const LadderNetwork& net, double freq) {
    if (!(freq > 0.0)) throw DomainError("ladder_s21: frequency must be > 0");
    const Abcd m = ladder_abcd(net, freq);
    const double rs = net.source_impedance, rl = net.load_impedance;
    return 2.0 * std::sqrt(rs * rl) / (m[0] * rl + m[1] + m[2] * rs * rl + m[3] * rs);
}

inline double ladder_s21_db(const LadderNetwork& net, double freq) {
    return 10.0 * std::log10(std::norm(ladder_s21(net, freq)));
}

inline constexpr int kStopbandGridPoints = 2001;
inline constexpr double kLumpedModelLimitHz = 10e9;

struct StopbandResult {
    bool pass = false;
    double worst_freq = 0.0;  // Hz
    double worst_db = 0.0;    // |S21|^2 in dB at worst_freq
    bool above_lumped_limit = false;
};

/// |S21|^2 on a 2001-point grid across `band`; passes iff every point is at
/// or below -threshold_db.
inline StopbandResult stopband_check(const LadderNetwork& net, double f_lo, double f_hi,
                                     double threshold_db) {
    if (!(f_lo > 0.0) || !(f_hi > f_lo)) {
        throw DomainError("stopband_check: band must satisfy 0 < f_lo < f_hi");
    }
    net.validate();
    StopbandResult r;
    r.worst_db = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kStopbandGridPoints; ++k) {
        const double f = f_lo + (f_hi - f_lo) * k / (kStopbandGridPoints - 1);
        const double db = ladder_s21_db(net, f);
        if (db > r.worst_db) {
            r.worst_db = db;
            r.worst_freq = f;
        }
    }
    r.pass = r.worst_db <= -threshold_db;
    r.above_lumped_limit = f_hi > kLumpedModelLimitHz;
    return r;
}

struct ThicknessCheck {
    StopbandResult nominal, thinner, thicker;
    bool pass() const { return nominal.pass && thinner.pass && thicker.pass; }
};

/// Stopband check at nominal dielectric thickness and at (1 -/+ variation)
/// times it; capacitors scale as d0/d.
inline ThicknessCheck stopband_check_thickness(const LadderNetwork& net, double f_lo, double f_hi,
                                               double threshold_db, double variation = 0.2) {
    if (!(variation >= 0.0 && variation < 1.0)) {
        throw DomainError("thickness variation must lie in [0, 1)");
    }
    ThicknessCheck c;
    c.nominal = stopband_check(net, f_lo, f_hi, threshold_db);
    c.thinner = stopband_check(net.with_capacitance_scaled(1.0 / (1.0 - variation)), f_lo, f_hi,
                               threshold_db);
    c.thicker = stopband_check(net.with_capacitance_scaled(1.0 / (1.0 + variation)), f_lo, f_hi,
                               threshold_db);
    return c;
}

/// Peak-to-peak insertion-loss variation below the cutoff (dB), sampled on
/// `n_points` frequencies in (0, f_cutoff].
inline double passband_ripple_db(const LadderNetwork& net, double f_cutoff, int n_points = 20001) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= n_points; ++k) {
        const double db = ladder_s21_db(net, f_cutoff * k / n_points);
        lo = std::min(lo, db);
        hi = std::max(hi, db);
    }
    return hi - lo;
}

struct FilterDesign {
    int order = 5;
    double ripple_db = 0.5;
    double cutoff_hz = 0.3e9;
    double z0 = 50.0;
};

inline LadderNetwork design_filter(const FilterDesign& d) {
    return denormalize_ladder(chebyshev_prototype(d.order, d.ripple_db), d.cutoff_hz, d.z0);
}

}  // namespace paramp::filter

#endif  // PARAMP_FILTER_SYNTH_HPP
