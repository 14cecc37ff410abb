#ifndef PARAMP_KERR_DYNAMICS_HPP
#define PARAMP_KERR_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paramp/detail/roots.hpp"
#include "paramp/error.hpp"
#include "paramp/units.hpp"

/// Forward model of a pumped single-mode Kerr resonator in reflection.
///
/// Conventions. All rates are ordinary frequencies in Hz: kappa_c and
/// kappa_i are full widths (FWHM), K is the mode shift per photon, and the
/// detuning is delta = f0 - f_pump (cavity minus pump, so the pumped mode
/// sits at delta + K n in the pump frame). With angular rates
/// k_ang = 2 pi k_hz the mean-field equation
///
///     da/dt = -i (Delta + K |a|^2) a - (kappa/2) a + sqrt(kappa_c) a_in,
///     |a_in|^2 = Phi  [photons/s]
///
/// has steady states n [(Delta + K n)^2 + (kappa/2)^2] = kappa_c Phi.
/// Dividing both sides by (2 pi)^3 leaves every rate in Hz and one factor
/// 1/(2 pi) on the drive:
///
///     n [(delta + K n)^2 + (kappa/2)^2] = kappa_c Phi / (2 pi).
///
/// The linear-response matrices below are homogeneous of degree one in the
/// rates, so the 2 pi cancels between kappa_c and the matrix inverse and the
/// gains are evaluated directly in Hz.
namespace paramp::kerr {

struct KerrMode {
    double f0 = 6.4e9;         // Hz, undriven resonance
    double kappa_c = 128e6;    // Hz, coupling FWHM
    double kappa_i = 1.6e6;    // Hz, internal-loss FWHM
    double kerr = -20e3;       // Hz per photon, negative = softening

    double kappa() const { return kappa_c + kappa_i; }

    void validate() const {
        if (!(f0 > 0.0)) throw DomainError("KerrMode: f0 must be > 0");
        if (!(kappa_c > 0.0)) throw DomainError("KerrMode: kappa_c must be > 0");
        if (!(kappa_i >= 0.0)) throw DomainError("KerrMode: kappa_i must be >= 0");
        if (!std::isfinite(kerr)) throw DomainError("KerrMode: kerr must be finite");
    }

    /// Mode from quality factors, kappa = f0 / Q.
    static KerrMode from_quality_factors(double f0, double q_c, double q_i, double kerr) {
        KerrMode m{f0, f0 / q_c, q_i > 0.0 && std::isfinite(q_i) ? f0 / q_i : 0.0, kerr};
        m.validate();
        return m;
    }
};

struct PumpBranch {
    double n = 0.0;  // intracavity pump photons
    bool stable = true;
};

struct PumpState {
    double f_pump = 0.0;           // Hz
    double power_at_port = 0.0;    // W
    double photon_flux_in = 0.0;   // photons / s
    std::vector<PumpBranch> branches;  // ascending in n

    /// Lowest-n stable branch (the one reached by ramping the power up).
    const PumpBranch& lower_stable() const {
        for (const auto& b : branches) {
            if (b.stable) return b;
        }
        throw ContractViolation("PumpState has no stable branch");
    }

    const PumpBranch& upper_stable() const {
        for (auto it = branches.rbegin(); it != branches.rend(); ++it) {
            if (it->stable) return *it;
        }
        throw ContractViolation("PumpState has no stable branch");
    }
};

/// Right-hand side kappa_c Phi / (2 pi) of the Hz-normalized cubic.
inline double drive_strength(const KerrMode& mode, double photon_flux) {
    return mode.kappa_c * photon_flux / constants::two_pi;
}

/// Left-hand side minus right-hand side of the steady-state cubic.
inline double steady_state_residual(const KerrMode& mode, double detuning, double n,
                                    double drive) {
    const double eff = detuning + mode.kerr * n;
    const double half_k = 0.5 * mode.kappa();
    return n * (eff * eff + half_k * half_k) - drive;
}

/// |residual| over the sum of the magnitudes of the cubic's terms.
inline double steady_state_relative_residual(const KerrMode& mode, double detuning, double n,
                                             double drive) {
    const double k = mode.kerr;
    const double half_k = 0.5 * mode.kappa();
    const double scale = k * k * n * n * n + std::abs(2.0 * detuning * k) * n * n +
                         (detuning * detuning + half_k * half_k) * n + drive;
    if (scale == 0.0) return 0.0;
    return std::abs(steady_state_residual(mode, detuning, n, drive)) / scale;
}

/// Determinant of the fluctuation matrix at zero signal offset,
/// (delta + 2Kn)^2 - (Kn)^2 + (kappa/2)^2. The trace is -kappa < 0, so the
/// branch is stable iff this is positive. Equals d(lhs)/dn of the cubic.
inline double stability_determinant(const KerrMode& mode, double detuning, double n) {
    const double kn = mode.kerr * n;
    const double eff = detuning + 2.0 * kn;
    const double half_k = 0.5 * mode.kappa();
    return eff * eff - kn * kn + half_k * half_k;
}

/// Real intracavity photon numbers solving the steady-state cubic at a given
/// pump detuning (delta = f0 - f_pump, Hz) and drive kappa_c Phi / (2 pi).
inline std::vector<double> steady_state_photon_numbers(const KerrMode& mode, double detuning,
                                                       double drive) {
    if (!(drive >= 0.0)) throw DomainError("drive must be >= 0");
    if (drive == 0.0) return {0.0};
    const double kappa = mode.kappa();
    const double half_k = 0.5 * kappa;
    if (mode.kerr == 0.0) {
        return {drive / (detuning * detuning + half_k * half_k)};
    }
    // Dimensionless form with n = u * kappa / |K|:
    //   u^3 + 2 s d u^2 + (d^2 + 1/4) u - drive |K| / kappa^3 = 0,
    // d = delta / kappa, s = sign(K).
    const double k_abs = std::abs(mode.kerr);
    const double s = mode.kerr > 0.0 ? 1.0 : -1.0;
    const double d = detuning / kappa;
    const double c0 = -drive * k_abs / (kappa * kappa * kappa);
    auto u_roots = detail::monic_cubic_real_roots(2.0 * s * d, d * d + 0.25, c0);

    std::vector<double> n;
    n.reserve(u_roots.size());
    const double scale = kappa / k_abs;
    for (double u : u_roots) {
        double x = u * scale;
        // One Newton step in physical units removes the rescaling round-off.
        const double f = steady_state_residual(mode, detuning, x, drive);
        const double df = stability_determinant(mode, detuning, x);
        if (df != 0.0) {
            const double y = x - f / df;
            if (std::abs(steady_state_residual(mode, detuning, y, drive)) < std::abs(f)) x = y;
        }
        n.push_back(x);
    }
    std::sort(n.begin(), n.end());
    return n;
}

/// Steady states of the driven mode for a tone of `power_at_port` watts at
/// `f_pump`. One or three branches; with three, the middle one is unstable.
inline PumpState pump_steady_states(const KerrMode& mode, double f_pump, double power_at_port) {
    mode.validate();
    if (!(power_at_port >= 0.0)) throw DomainError("pump power must be >= 0");
    if (!(f_pump > 0.0)) throw DomainError("pump frequency must be > 0");
    PumpState st;
    st.f_pump = f_pump;
    st.power_at_port = power_at_port;
    st.photon_flux_in = photon_flux(power_at_port, f_pump);
    const double detuning = mode.f0 - f_pump;
    const double drive = drive_strength(mode, st.photon_flux_in);
    for (double n : steady_state_photon_numbers(mode, detuning, drive)) {
        st.branches.push_back({n, stability_determinant(mode, detuning, n) > 0.0});
    }
    return st;
}

struct BistabilityThreshold {
    double n_crit;      // photons
    double delta_crit;  // Hz, f0 - f_pump at the critical point
};

/// Critical point of the Duffing response: beyond |delta_crit| (with the
/// sign opposite to K) a window of drive powers has three steady states.
inline BistabilityThreshold bistability_threshold(const KerrMode& mode) {
    mode.validate();
    if (mode.kerr == 0.0) throw DomainError("bistability_threshold: linear mode has no threshold");
    const double kappa = mode.kappa();
    const double sgn = mode.kerr > 0.0 ? 1.0 : -1.0;
    return {kappa / (std::sqrt(3.0) * std::abs(mode.kerr)), -sgn * std::sqrt(3.0) * kappa / 2.0};
}

/// Drive kappa_c Phi/(2 pi) at which the lower stable branch ends (the
/// lower turning point), for a detuning beyond the critical one. Returns
/// nullopt when the response is single-valued.
struct TurningPoint {
    double n;
    double drive;
};

inline std::optional<TurningPoint> lower_turning_point(const KerrMode& mode, double detuning) {
    const double k = mode.kerr;
    if (k == 0.0) return std::nullopt;
    const double half_k = 0.5 * mode.kappa();
    // d(lhs)/dn = 3K^2 n^2 + 4 delta K n + delta^2 + kappa^2/4 = 0.
    const double a = 3.0 * k * k;
    const double b = 4.0 * detuning * k;
    const double c = detuning * detuning + half_k * half_k;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0 || b >= 0.0) return std::nullopt;
    // Smaller positive root; b < 0 so -b + sqrt is the large one.
    const double big = (-b + std::sqrt(disc)) / (2.0 * a);
    const double n = c / (a * big);
    const double eff = detuning + k * n;
    return TurningPoint{n, n * (eff * eff + half_k * half_k)};
}

/// Power at the coupling port (W) producing drive strength `drive` at f_pump.
inline double power_for_drive(const KerrMode& mode, double f_pump, double drive) {
    return drive * constants::two_pi / mode.kappa_c * constants::planck * f_pump;
}

struct SignalIdlerGain {
    std::complex<double> signal;
    std::complex<double> idler;
};

/// Fluctuation matrix A with A x = sqrt(kappa_c) x_in for x = (d[w], d^dag[-w]),
/// at signal offset w = f_signal - f_pump. Hz units.
///
///   A = [ kappa/2 - i(w - dt)     i K n           ]
///       [ -i K n                  kappa/2 - i(w + dt) ],   dt = delta + 2 K n.
///
/// The pump amplitude is taken real; its phase only rotates the idler.
struct FluctuationMatrix {
    std::complex<double> a11, a12, a21, a22;

    std::complex<double> det() const { return a11 * a22 - a12 * a21; }
};

inline FluctuationMatrix fluctuation_matrix(const KerrMode& mode, double detuning, double n_pump,
                                            double offset) {
    using namespace std::complex_literals;
    const double half_k = 0.5 * mode.kappa();
    const double kn = mode.kerr * n_pump;
    const double eff = detuning + 2.0 * kn;
    return {half_k - 1i * (offset - eff), 1i * kn, -1i * kn, half_k - 1i * (offset + eff)};
}

/// Gains from the input at f_signal to the outputs at f_signal and at the
/// idler 2 f_pump - f_signal, using output = input - sqrt(kappa_c) d.
inline SignalIdlerGain gain_at(const KerrMode& mode, double detuning, double n_pump,
                               double offset) {
    const FluctuationMatrix m = fluctuation_matrix(mode, detuning, n_pump, offset);
    const std::complex<double> det = m.det();
    if (det == 0.0) throw NumericalError("fluctuation matrix is singular");
    const std::complex<double> inv11 = m.a22 / det;
    const std::complex<double> inv12 = -m.a12 / det;
    return {1.0 - mode.kappa_c * inv11, -mode.kappa_c * inv12};
}

inline SignalIdlerGain signal_idler_gain(const KerrMode& mode, const PumpState& pump,
                                         const PumpBranch& branch, double f_signal) {
    mode.validate();
    const double detuning = mode.f0 - pump.f_pump;
    if (!branch.stable || !(stability_determinant(mode, detuning, branch.n) > 0.0)) {
        throw ContractViolation("signal_idler_gain: pump branch is unstable");
    }
    return gain_at(mode, detuning, branch.n, f_signal - pump.f_pump);
}

/// Gain on the lower stable branch.
inline SignalIdlerGain signal_idler_gain(const KerrMode& mode, const PumpState& pump,
                                         double f_signal) {
    return signal_idler_gain(mode, pump, pump.lower_stable(), f_signal);
}

struct GainProfile {
    std::vector<double> freq;  // Hz
    std::vector<std::complex<double>> signal_gain;
    std::vector<std::complex<double>> idler_gain;
    double peak_gain_db = 0.0;
    double peak_freq = 0.0;
    double fwhm = 0.0;  // Hz, of |g_s|^2 - 1
    double gbw = 0.0;   // Hz, sqrt(G0_lin) * fwhm
    bool reliable = false;
    std::string diagnostic;

    double gain_db(std::size_t i) const { return linear_to_db(std::norm(signal_gain[i])); }
    double idler_gain_db(std::size_t i) const { return linear_to_db(std::norm(idler_gain[i])); }
};

namespace detail_gain {

/// Peak, FWHM and GBW of |g|^2 - 1 on the sampled grid.
inline void compute_metrics(GainProfile& p) {
    const std::size_t n = p.freq.size();
    std::vector<double> excess(n);
    std::size_t ipk = 0;
    for (std::size_t i = 0; i < n; ++i) {
        excess[i] = std::norm(p.signal_gain[i]) - 1.0;
        if (excess[i] > excess[ipk]) ipk = i;
    }
    p.peak_freq = p.freq[ipk];
    p.peak_gain_db = linear_to_db(excess[ipk] + 1.0);
    p.fwhm = 0.0;
    p.gbw = 0.0;
    p.reliable = false;
    if (!(excess[ipk] > 1e-12)) {
        p.diagnostic = "degenerate: no gain above unity";
        return;
    }
    if (ipk == 0 || ipk + 1 == n) {
        p.diagnostic = "unreliable: peak on grid boundary";
        return;
    }
    const double half = 0.5 * excess[ipk];
    std::size_t i = ipk;
    while (i > 0 && excess[i - 1] > half) --i;
    std::size_t j = ipk;
    while (j + 1 < n && excess[j + 1] > half) ++j;
    if (i == 0 || j + 1 == n) {
        p.diagnostic = "unreliable: half maximum not reached inside the grid";
        return;
    }
    auto cross = [&](std::size_t a, std::size_t b) {
        return p.freq[a] + (half - excess[a]) * (p.freq[b] - p.freq[a]) / (excess[b] - excess[a]);
    };
    const double f_left = cross(i - 1, i);
    const double f_right = cross(j, j + 1);
    p.fwhm = f_right - f_left;
    p.gbw = std::sqrt(db_to_linear(p.peak_gain_db)) * p.fwhm;
    p.reliable = true;
    p.diagnostic.clear();
}

}  // namespace detail_gain

/// Samples the signal/idler gain on a uniform grid and extracts G0, the FWHM
/// of |g_s|^2 - 1 around the peak (linear interpolation) and GBW.
inline GainProfile gain_profile(const KerrMode& mode, const PumpState& pump,
                                const PumpBranch& branch, double f_lo, double f_hi,
                                int n_points) {
    if (!(f_lo < f_hi)) throw DomainError("gain_profile: need f_lo < f_hi");
    if (n_points < 3) throw DomainError("gain_profile: need at least 3 points");
    GainProfile p;
    p.freq.resize(static_cast<std::size_t>(n_points));
    p.signal_gain.resize(p.freq.size());
    p.idler_gain.resize(p.freq.size());
    const double step = (f_hi - f_lo) / (n_points - 1);
    for (int k = 0; k < n_points; ++k) {
        const double f = (k == n_points - 1) ? f_hi : f_lo + k * step;
        const auto g = signal_idler_gain(mode, pump, branch, f);
        p.freq[k] = f;
        p.signal_gain[k] = g.signal;
        p.idler_gain[k] = g.idler;
    }
    detail_gain::compute_metrics(p);
    return p;
}

inline GainProfile gain_profile(const KerrMode& mode, const PumpState& pump, double f_lo,
                                double f_hi, int n_points) {
    return gain_profile(mode, pump, pump.lower_stable(), f_lo, f_hi, n_points);
}

/// Peak of |g_s|^2 over signal offsets for a pump state, found without a
/// grid: |g_s|^2 is even in the offset and, with the matrix determinant
/// det(w) = (kappa/2 - i w)^2 + dt^2 - (Kn)^2, its maximum is either at
/// w = 0 or on a symmetric pair. Evaluated by golden-section on w >= 0.
inline double peak_gain_linear(const KerrMode& mode, double detuning, double n_pump,
                               double* peak_offset = nullptr) {
    auto g2 = [&](double w) { return std::norm(gain_at(mode, detuning, n_pump, w).signal); };
    // Coarse scan out to a few linewidths, then golden-section around the best.
    const double span = 2.0 * mode.kappa();
    constexpr int kScan = 200;
    double best_w = 0.0;
    double best = g2(0.0);
    for (int k = 1; k <= kScan; ++k) {
        const double w = span * k / kScan;
        const double v = g2(w);
        if (v > best) {
            best = v;
            best_w = w;
        }
    }
    double a = std::max(0.0, best_w - span / kScan);
    double b = best_w + span / kScan;
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = g2(c), fd = g2(d);
    for (int it = 0; it < 80 && (b - a) > 1e-9 * mode.kappa(); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = g2(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = g2(d);
        }
    }
    const double w = 0.5 * (a + b);
    const double v = g2(w);
    if (v >= best) {
        best = v;
        best_w = w;
    }
    if (peak_offset) *peak_offset = best_w;
    return best;
}

struct OperatingPoint {
    double f_pump = 0.0;   // Hz
    double power = 0.0;    // W at the coupling port
    double n_pump = 0.0;
    double peak_gain_db = 0.0;
};

/// Lower-branch pump power at a given detuning for which the peak gain
/// reaches `target_db`, by bisection below the turning point (where the gain
/// diverges). nullopt when the target is not reached.
inline std::optional<OperatingPoint> pump_for_gain(const KerrMode& mode, double detuning,
                                                   double target_db) {
    const auto turn = lower_turning_point(mode, detuning);
    if (!turn) return std::nullopt;
    const double f_pump = mode.f0 - detuning;
    const double target = db_to_linear(target_db);
    auto gain_for = [&](double drive, double* n_out) {
        const auto roots = steady_state_photon_numbers(mode, detuning, drive);
        const double n = roots.front();
        if (n_out) *n_out = n;
        return peak_gain_linear(mode, detuning, n);
    };
    double lo = 0.0;
    double hi = turn->drive;
    // Just below the turning point the gain exceeds any finite target.
    double n_hi = 0.0;
    double probe = hi * (1.0 - 1e-12);
    if (gain_for(probe, &n_hi) < target) return std::nullopt;
    hi = probe;
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gain_for(mid, nullptr) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    OperatingPoint op;
    op.f_pump = f_pump;
    double n = 0.0;
    op.peak_gain_db = linear_to_db(gain_for(hi, &n));
    op.n_pump = n;
    op.power = power_for_drive(mode, f_pump, hi);
    return op;
}

/// Detuning (f0 - f_pump) at which the lower turning point has dt = 0; there
/// the high-gain limit of GBW equals kappa_c exactly.
inline double bandwidth_optimal_detuning(const KerrMode& mode) {
    const double sgn = mode.kerr > 0.0 ? 1.0 : -1.0;
    return -sgn * mode.kappa();
}

struct PumpSearchResult {
    OperatingPoint point;
    GainProfile profile;
    PumpBranch branch;
    PumpState state;
};

/// Samples a gain profile centred on the pump covering +/- `half_span_factor`
/// linewidths.
inline GainProfile profile_around_pump(const KerrMode& mode, const PumpState& st,
                                       double half_span = 0.0, int n_points = 4001) {
    if (half_span <= 0.0) half_span = mode.kappa();
    return gain_profile(mode, st, st.f_pump - half_span, st.f_pump + half_span, n_points);
}

/// Lowest-power stable operating point reaching `target_gain_db` +/- 0.5 dB.
///
/// Grid: |delta| = |delta_crit| (1 + 0.02 k), k = 0..100, on the side set by
/// sign(K). At each detuning the power is bisected on the lower branch below
/// its turning point; the lowest power across the grid wins. A zero target
/// returns the undriven point.
inline PumpSearchResult optimal_pump_search(const KerrMode& mode, double target_gain_db) {
    mode.validate();
    if (!(target_gain_db >= 0.0 && target_gain_db < 40.0)) {
        throw DomainError("optimal_pump_search: target must lie in [0, 40) dB");
    }
    PumpSearchResult out;
    if (target_gain_db == 0.0) {
        out.point.f_pump = mode.f0;
        out.state = pump_steady_states(mode, mode.f0, 0.0);
        out.branch = out.state.lower_stable();
        out.profile = profile_around_pump(mode, out.state, 0.0, 401);
        return out;
    }
    if (mode.kerr == 0.0) throw NotFoundError("optimal_pump_search: linear mode cannot amplify");
    const auto thr = bistability_threshold(mode);
    std::optional<OperatingPoint> best;
    constexpr int kGrid = 100;
    for (int k = 0; k <= kGrid; ++k) {
        const double detuning = thr.delta_crit * (1.0 + 0.02 * k);
        auto op = pump_for_gain(mode, detuning, target_gain_db);
        if (op && (!best || op->power < best->power)) best = op;
    }
    if (!best) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "optimal_pump_search: %.2f dB unreachable for |delta| in [%.6g, %.6g] Hz",
                      target_gain_db, std::abs(thr.delta_crit), 3.0 * std::abs(thr.delta_crit));
        throw NotFoundError(buf);
    }
    out.point = *best;
    out.state = pump_steady_states(mode, best->f_pump, best->power);
    out.branch = out.state.lower_stable();
    // Gain bandwidth shrinks as 1/sqrt(G); size the grid accordingly.
    const double half_span = 4.0 * mode.kappa() / std::sqrt(db_to_linear(target_gain_db));
    out.profile = profile_around_pump(mode, out.state, half_span, 4001);
    if (std::abs(out.profile.peak_gain_db - target_gain_db) > 0.5) {
        throw NotFoundError("optimal_pump_search: sampled profile misses the target gain");
    }
    return out;
}

struct CompressionPoint {
    double signal_power = 0.0;  // W at the coupling port
    double gain_db = 0.0;
    double n_pump = 0.0;
    double n_signal = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct CompressionSweep {
    std::vector<CompressionPoint> points;
    double small_signal_gain_db = 0.0;
    std::optional<double> p1db;  // W; first crossing of G0 - 1 dB, log-interpolated
    std::size_t skipped = 0;     // unconverged points (only with skip_unconverged)
};

struct CompressionSettings {
    double damping = 0.5;
    double tolerance = 1e-8;
    int max_iterations = 200;
    /// Record unconverged sweep points instead of throwing.
    bool skip_unconverged = false;
};

/// Self-consistent stiff-pump breakdown at one signal power.
///
/// The intracavity signal+idler population n_s adds to the pump population
/// in the Kerr shift: the pump solves the cubic with detuning delta + K n_s
/// (the stable root continuing the previous iterate is kept), and n_s
/// follows from the linear response at that pump state,
///     n_s = (|A^-1_11|^2 + |A^-1_21|^2) kappa_c Phi_s / (2 pi).
/// Iterated with damping until both populations change by less than the
/// relative tolerance. `start` seeds the iteration (continuation along a
/// sweep); by default it starts from the lower pump branch with n_s = 0.
/// Convergence slows critically next to the fold where the lower
/// self-consistent solution disappears.
inline CompressionPoint compression_point(const KerrMode& mode, double f_pump, double pump_power,
                                          double f_signal, double signal_power,
                                          const CompressionSettings& cfg = {},
                                          const CompressionPoint* start = nullptr) {
    const double detuning = mode.f0 - f_pump;
    const double pump_drive = drive_strength(mode, photon_flux(pump_power, f_pump));
    const double sig_drive = drive_strength(mode, photon_flux(signal_power, f_signal));
    const double offset = f_signal - f_pump;

    // Stable root continuing the previous iterate.
    auto pump_root = [&](double shift, double previous) {
        const double shifted = detuning + mode.kerr * shift;
        const auto roots = steady_state_photon_numbers(mode, shifted, pump_drive);
        double best = roots.front();
        double best_dist = std::numeric_limits<double>::infinity();
        for (double r : roots) {
            if (!(stability_determinant(mode, shifted, r) > 0.0)) continue;
            if (std::abs(r - previous) < best_dist) {
                best = r;
                best_dist = std::abs(r - previous);
            }
        }
        return best;
    };
    auto signal_population = [&](double n_p, double n_s) {
        const FluctuationMatrix m =
            fluctuation_matrix(mode, detuning + mode.kerr * n_s, n_p, offset);
        const std::complex<double> det = m.det();
        const std::complex<double> inv11 = m.a22 / det;
        const std::complex<double> inv21 = -m.a21 / det;
        return (std::norm(inv11) + std::norm(inv21)) * sig_drive;
    };

    double n_p = start ? start->n_pump : pump_root(0.0, 0.0);
    double n_s = start ? start->n_signal : 0.0;
    if (signal_power == 0.0) {
        n_p = pump_root(0.0, n_p);
        n_s = 0.0;
    }
    int it = 0;
    bool converged = signal_power == 0.0;
    while (!converged && it < cfg.max_iterations) {
        ++it;
        const double np_new = pump_root(n_s, n_p);
        const double ns_new = signal_population(np_new, n_s);
        const double np_next = (1.0 - cfg.damping) * n_p + cfg.damping * np_new;
        const double ns_next = (1.0 - cfg.damping) * n_s + cfg.damping * ns_new;
        const double change = std::max(std::abs(np_next - n_p) / std::max(n_p, 1e-300),
                                       std::abs(ns_next - n_s) / std::max(ns_next, 1e-300));
        n_p = np_next;
        n_s = ns_next;
        converged = change < cfg.tolerance;
    }
    if (!converged) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "n_pump=%.10g n_signal=%.10g after %d iterations", n_p, n_s,
                      it);
        throw ConvergenceError("compression fixed point did not converge", buf);
    }
    const double shifted = detuning + mode.kerr * n_s;
    if (!(stability_determinant(mode, shifted, n_p) > 0.0)) {
        throw NumericalError("compression fixed point landed on an unstable pump state");
    }
    const double g = std::norm(gain_at(mode, shifted, n_p, offset).signal);
    CompressionPoint out;
    out.signal_power = signal_power;
    out.gain_db = linear_to_db(g);
    out.n_pump = n_p;
    out.n_signal = n_s;
    out.iterations = it;
    return out;
}

/// Gain versus signal power at a fixed pump operating point, continued
/// point to point in the order given. The operating point must be stable at
/// zero signal; the 1 dB compression input power is interpolated in log
/// power between the bracketing samples.
inline CompressionSweep compression_sweep(const KerrMode& mode, double f_pump, double pump_power,
                                          double f_signal, const std::vector<double>& signal_powers,
                                          const CompressionSettings& cfg = {}) {
    mode.validate();
    const auto st = pump_steady_states(mode, f_pump, pump_power);
    const PumpBranch& br = st.lower_stable();
    CompressionSweep sweep;
    sweep.small_signal_gain_db =
        linear_to_db(std::norm(signal_idler_gain(mode, st, br, f_signal).signal));
    CompressionPoint previous;
    previous.n_pump = br.n;
    for (double p : signal_powers) {
        if (!(p >= 0.0)) throw DomainError("compression_sweep: signal powers must be >= 0");
        try {
            previous = compression_point(mode, f_pump, pump_power, f_signal, p, cfg, &previous);
            sweep.points.push_back(previous);
        } catch (const ConvergenceError&) {
            if (!cfg.skip_unconverged) throw;
            CompressionPoint bad;
            bad.signal_power = p;
            bad.gain_db = std::numeric_limits<double>::quiet_NaN();
            bad.converged = false;
            bad.iterations = cfg.max_iterations;
            sweep.points.push_back(bad);
            ++sweep.skipped;
        }
    }
    const double level = sweep.small_signal_gain_db - 1.0;
    const CompressionPoint* prev = nullptr;
    for (const auto& b : sweep.points) {
        if (!b.converged) continue;
        if (prev && prev->gain_db > level && b.gain_db <= level && prev->signal_power > 0.0) {
            const double t = (prev->gain_db - level) / (prev->gain_db - b.gain_db);
            const double la = std::log10(prev->signal_power);
            const double lb = std::log10(b.signal_power);
            sweep.p1db = std::pow(10.0, la + t * (lb - la));
            break;
        }
        prev = &b;
    }
    return sweep;
}

/// Total input-referred noise of an ideal phase-preserving amplifier,
/// h f / k_B (half added noise, half vacuum).
inline double quantum_limit_temperature(double f) {
    if (!(f > 0.0)) throw DomainError("quantum_limit_temperature: f must be > 0");
    return constants::planck * f / constants::boltzmann;
}

/// SNR gain from inserting a quantum-limited preamp with gain G before a
/// following stage of noise temperature t_hemt:
/// 10 log10( G (T_QL + T_H) / (G T_QL + T_H) ).
inline double snr_improvement(double gain_db, double t_hemt, double f) {
    if (!(gain_db >= 0.0)) throw DomainError("snr_improvement: gain must be >= 0 dB");
    if (!(t_hemt > 0.0)) throw DomainError("snr_improvement: t_hemt must be > 0");
    const double g = db_to_linear(gain_db);
    const double tq = quantum_limit_temperature(f);
    return linear_to_db(g * (tq + t_hemt) / (g * tq + t_hemt));
}

/// Large-gain limit of snr_improvement, 10 log10(1 + T_H / T_QL).
inline double snr_improvement_asymptote(double t_hemt, double f) {
    return linear_to_db(1.0 + t_hemt / quantum_limit_temperature(f));
}

}  // namespace paramp::kerr

#endif  // PARAMP_KERR_DYNAMICS_HPP
