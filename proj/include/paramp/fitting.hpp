#ifndef PARAMP_FITTING_HPP
#define PARAMP_FITTING_HPP

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paramp/detail/levenberg_marquardt.hpp"
#include "paramp/error.hpp"
#include "paramp/units.hpp"

namespace paramp::fit {

struct ComplexTrace {
    std::vector<double> freq;  // Hz, strictly increasing
    std::vector<std::complex<double>> s21;
    std::optional<double> power_at_port;  // W
    std::map<std::string, std::string> metadata;

    /// Structural checks only; fits impose their own minimum length.
    void validate(std::size_t min_points = 1) const {
        if (freq.size() != s21.size()) throw ValidationError("trace: freq and s21 lengths differ");
        if (freq.size() < min_points) {
            throw ValidationError("trace: need at least " + std::to_string(min_points) +
                                  " points, got " + std::to_string(freq.size()));
        }
        for (std::size_t i = 1; i < freq.size(); ++i) {
            if (!(freq[i] > freq[i - 1])) {
                throw ValidationError("trace: frequencies not strictly increasing at index " +
                                      std::to_string(i));
            }
        }
    }
};

struct GainTrace {
    std::vector<double> freq;     // Hz
    std::vector<double> gain_db;
    std::optional<double> f_pump;  // Hz
    std::optional<double> p_pump;  // W

    void validate(std::size_t min_points = 1) const {
        if (freq.size() != gain_db.size()) {
            throw ValidationError("gain trace: freq and gain lengths differ");
        }
        if (freq.size() < min_points) {
            throw ValidationError("gain trace: need at least " + std::to_string(min_points) +
                                  " points, got " + std::to_string(freq.size()));
        }
        for (std::size_t i = 1; i < freq.size(); ++i) {
            if (!(freq[i] > freq[i - 1])) {
                throw ValidationError("gain trace: frequencies not strictly increasing at index " +
                                      std::to_string(i));
            }
        }
    }
};

struct Spectrum {
    std::vector<double> freq;       // Hz
    std::vector<double> power_dbm;  // per resolution bandwidth bin
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Named parameter estimates (in insertion order) plus solver diagnostics.
struct FitResult {
    std::vector<std::pair<std::string, Estimate>> params;
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> flags;

    bool reliable() const { return converged; }

    bool has(const std::string& name) const {
        return std::any_of(params.begin(), params.end(),
                           [&](const auto& p) { return p.first == name; });
    }

    const Estimate& at(const std::string& name) const {
        for (const auto& p : params) {
            if (p.first == name) return p.second;
        }
        throw std::out_of_range("FitResult has no parameter '" + name + "'");
    }

    double value(const std::string& name) const { return at(name).value; }

    void set(const std::string& name, double value, double std_error) {
        for (auto& p : params) {
            if (p.first == name) {
                p.second = {value, std::max(std_error, 0.0)};
                return;
            }
        }
        params.emplace_back(name, Estimate{value, std::max(std_error, 0.0)});
    }

    bool flagged(const std::string& flag) const {
        return std::find(flags.begin(), flags.end(), flag) != flags.end();
    }
};

// ---------------------------------------------------------------------------
// Reflection resonator
// ---------------------------------------------------------------------------

/// Parameters of the reflection-resonator line shape with environment:
///
///   S(f) = a e^{i alpha} e^{-2 pi i f tau}
///          [1 - (2 Q_l / |Q_c|) e^{i phi} / (1 + 2 i Q_l (f / f_r - 1))],
///
/// with 1/Q_l = 1/Q_i + cos(phi) / |Q_c| (complex Q_c = |Q_c| e^{-i phi}).
struct ReflectionParams {
    double f_r = 6.4e9;
    double q_i = 4363.0;
    double q_c = 50.0;  // |Q_c|
    double phi = 0.0;   // impedance-mismatch angle, rad
    double amplitude = 1.0;
    double alpha = 0.0;  // rad
    double tau = 0.0;    // s

    double q_loaded() const { return 1.0 / (1.0 / q_i + std::cos(phi) / q_c); }
};

inline std::complex<double> reflection_model(double f, const ReflectionParams& p) {
    using namespace std::complex_literals;
    const double ql = p.q_loaded();
    const std::complex<double> env =
        p.amplitude * std::exp(1i * (p.alpha - constants::two_pi * f * p.tau));
    const std::complex<double> res =
        1.0 - (2.0 * ql / p.q_c) * std::exp(1i * p.phi) / (1.0 + 2.0i * ql * (f / p.f_r - 1.0));
    return env * res;
}

inline ComplexTrace synthesize_reflection(const ReflectionParams& p, double f_lo, double f_hi,
                                          int n_points) {
    ComplexTrace t;
    t.freq.resize(static_cast<std::size_t>(n_points));
    t.s21.resize(t.freq.size());
    for (int k = 0; k < n_points; ++k) {
        const double f = f_lo + (f_hi - f_lo) * k / (n_points - 1);
        t.freq[k] = f;
        t.s21[k] = reflection_model(f, p);
    }
    return t;
}

namespace detail_fit {

struct Circle {
    std::complex<double> center;
    double radius = 0.0;
    double rms = 0.0;  // rms radial residual
};

/// Algebraic (Kasa) circle: least squares on x^2 + y^2 + D x + E y + F = 0.
inline Circle fit_circle(const std::vector<std::complex<double>>& z) {
    std::complex<double> mean = std::accumulate(z.begin(), z.end(), std::complex<double>{}) /
                                static_cast<double>(z.size());
    double scale = 0.0;
    for (const auto& v : z) scale = std::max(scale, std::abs(v - mean));
    if (!(scale > 0.0)) return {mean, 0.0, 0.0};
    // Normal equations of the centred, scaled problem are well conditioned.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (const auto& v : z) {
        const std::complex<double> w = (v - mean) / scale;
        const Eigen::Vector3d row(w.real(), w.imag(), 1.0);
        ata.noalias() += row * row.transpose();
        atb.noalias() -= row * std::norm(w);
    }
    const Eigen::Vector3d sol = ata.ldlt().solve(atb);
    const std::complex<double> c(-0.5 * sol(0), -0.5 * sol(1));
    const double r2 = std::norm(c) - sol(2);
    Circle out;
    out.center = mean + scale * c;
    out.radius = scale * std::sqrt(std::max(r2, 0.0));
    double ss = 0.0;
    for (const auto& v : z) {
        const double d = std::abs(v - out.center) - out.radius;
        ss += d * d;
    }
    out.rms = std::sqrt(ss / static_cast<double>(z.size()));
    return out;
}

inline std::vector<double> unwrapped_phase(const std::vector<std::complex<double>>& z) {
    std::vector<double> ph(z.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double raw = std::arg(z[i]);
        if (i > 0) {
            double d = raw + offset - ph[i - 1];
            while (d > constants::pi) {
                offset -= constants::two_pi;
                d -= constants::two_pi;
            }
            while (d < -constants::pi) {
                offset += constants::two_pi;
                d += constants::two_pi;
            }
        }
        ph[i] = raw + offset;
    }
    return ph;
}

inline std::vector<std::complex<double>> remove_delay(const ComplexTrace& t, double tau) {
    using namespace std::complex_literals;
    std::vector<std::complex<double>> z(t.s21.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = t.s21[i] * std::exp(1i * constants::two_pi * t.freq[i] * tau);
    }
    return z;
}

/// Cable delay from the two trace edges: common phase slope, separate
/// intercepts (the resonance winds the phase by 2 pi in between).
inline double edge_delay_estimate(const ComplexTrace& t) {
    const std::size_t n = t.freq.size();
    const std::size_t m = std::max<std::size_t>(3, n / 10);
    const auto ph = unwrapped_phase(t.s21);
    double sx_l = 0, sy_l = 0, sx_r = 0, sy_r = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx_l += t.freq[i];
        sy_l += ph[i];
        sx_r += t.freq[n - 1 - i];
        sy_r += ph[n - 1 - i];
    }
    const double mx_l = sx_l / m, my_l = sy_l / m, mx_r = sx_r / m, my_r = sy_r / m;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sxy += (t.freq[i] - mx_l) * (ph[i] - my_l);
        sxx += (t.freq[i] - mx_l) * (t.freq[i] - mx_l);
        const std::size_t k = n - 1 - i;
        sxy += (t.freq[k] - mx_r) * (ph[k] - my_r);
        sxx += (t.freq[k] - mx_r) * (t.freq[k] - mx_r);
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    return -slope / constants::two_pi;
}

/// Refines the delay by minimizing the circle-fit residual over a window of
/// +/- 0.5/span around the edge estimate: coarse scan, then golden section.
inline double refine_delay(const ComplexTrace& full, double tau0) {
    // A decimated copy is enough here; the final polish refits the delay.
    constexpr std::size_t kMaxPoints = 4001;
    ComplexTrace t;
    const std::size_t stride = (full.freq.size() + kMaxPoints - 1) / kMaxPoints;
    for (std::size_t i = 0; i < full.freq.size(); i += stride) {
        t.freq.push_back(full.freq[i]);
        t.s21.push_back(full.s21[i]);
    }
    const double span = t.freq.back() - t.freq.front();
    const double w = 0.5 / span;
    auto cost = [&](double tau) { return fit_circle(remove_delay(t, tau)).rms; };
    constexpr int kScan = 16;
    double best = tau0, best_c = cost(tau0);
    for (int k = 0; k <= kScan; ++k) {
        const double tau = tau0 - w + 2.0 * w * k / kScan;
        const double c = cost(tau);
        if (c < best_c) {
            best_c = c;
            best = tau;
        }
    }
    double a = best - 2.0 * w / kScan, b = best + 2.0 * w / kScan;
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = cost(c), fd = cost(d);
    for (int it = 0; it < 40; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = cost(d);
        }
    }
    const double mid = 0.5 * (a + b);
    return cost(mid) < best_c ? mid : best;
}

struct PhaseFit {
    double theta0 = 0.0;
    double q_loaded = 0.0;
    double f_r = 0.0;
    bool converged = false;
};

/// theta(f) = theta0 + 2 atan(2 Q_l (1 - f / f_r)) on the phase of the
/// circle-centred trace.
inline PhaseFit fit_phase(const std::vector<double>& freq_full,
                          const std::vector<double>& theta_full) {
    // Starting values only; decimate long traces.
    constexpr std::size_t kMaxPoints = 4001;
    const std::size_t stride = (freq_full.size() + kMaxPoints - 1) / kMaxPoints;
    std::vector<double> freq, theta;
    for (std::size_t i = 0; i < freq_full.size(); i += stride) {
        freq.push_back(freq_full[i]);
        theta.push_back(theta_full[i]);
    }
    const std::size_t n = freq.size();
    // Resonance where the phase moves fastest.
    std::size_t ir = 1;
    double best_slope = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double s = (theta[i + 1] - theta[i - 1]) / (freq[i + 1] - freq[i - 1]);
        if (std::abs(s) > std::abs(best_slope)) {
            best_slope = s;
            ir = i;
        }
    }
    const double f_r0 = freq[ir];
    const double ql0 = std::max(std::abs(best_slope) * f_r0 / 4.0, 1.0);
    const double theta00 = theta[ir];
    // Solve in (theta0, log Q_l, (f_r - f_r0) / span).
    const double span = freq.back() - freq.front();
    detail::Vec p(3);
    p << theta00, std::log(ql0), 0.0;
    auto residual = [&](const detail::Vec& x) {
        detail::Vec r(static_cast<Eigen::Index>(n));
        const double ql = std::exp(x[1]);
        const double fr = f_r0 + x[2] * span;
        for (std::size_t i = 0; i < n; ++i) {
            r[static_cast<Eigen::Index>(i)] =
                x[0] + 2.0 * std::atan(2.0 * ql * (1.0 - freq[i] / fr)) - theta[i];
        }
        return r;
    };
    detail::LmOptions opt;
    opt.typical = {1.0, 1.0, 1e-3};
    const auto lm = detail::levenberg_marquardt(residual, p, opt);
    PhaseFit out;
    out.theta0 = lm.params[0];
    out.q_loaded = std::exp(lm.params[1]);
    out.f_r = f_r0 + lm.params[2] * span;
    out.converged = lm.converged;
    return out;
}

}  // namespace detail_fit

/// Reflection-resonator fit.
///
/// Steps: (1) cable delay from a common-slope phase fit on the trace edges,
/// refined by minimizing the circle residual; (2) algebraic circle fit;
/// (3) arctangent fit of the phase around the circle centre for f_r and
/// Q_l; (4) the off-resonant point fixes amplitude and phase, and the
/// normalized circle gives |Q_c| = Q_l / r and the mismatch angle phi
/// (diameter correction), with 1/Q_i = 1/Q_l - cos(phi)/|Q_c|; (5) a
/// Levenberg-Marquardt polish of all seven parameters on the complex
/// residuals, which also supplies standard errors.
///
/// Parameters reported: f0, Q_i, Q_c (= |Q_c|), phi, Q_total, amplitude,
/// alpha, tau.
inline FitResult resonator_reflection_fit(const ComplexTrace& trace) {
    trace.validate(8);
    const std::size_t n = trace.freq.size();

    // A trace recorded with the opposite time convention circles the other
    // way; conjugate it so the phase decreases through resonance.
    ComplexTrace t = trace;
    bool conjugated = false;
    {
        const double tau0 = detail_fit::edge_delay_estimate(t);
        const auto z = detail_fit::remove_delay(t, tau0);
        const auto c = detail_fit::fit_circle(z);
        std::vector<std::complex<double>> centred(n);
        for (std::size_t i = 0; i < n; ++i) centred[i] = z[i] - c.center;
        const auto ph = detail_fit::unwrapped_phase(centred);
        if (ph.back() > ph.front()) {
            for (auto& v : t.s21) v = std::conj(v);
            conjugated = true;
        }
    }

    const double tau = detail_fit::refine_delay(t, detail_fit::edge_delay_estimate(t));
    const auto z = detail_fit::remove_delay(t, tau);
    const auto circle = detail_fit::fit_circle(z);
    if (!(circle.radius > 3.0 * circle.rms) || !(circle.radius > 0.0)) {
        throw NumericalError("resonator_reflection_fit: no resonance (circle radius below noise)");
    }

    std::vector<std::complex<double>> centred(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = z[i] - circle.center;
    const auto theta = detail_fit::unwrapped_phase(centred);
    const auto pf = detail_fit::fit_phase(t.freq, theta);
    if (!pf.converged) throw NumericalError("resonator_reflection_fit: phase fit did not converge");

    using namespace std::complex_literals;
    const std::complex<double> off =
        circle.center + circle.radius * std::exp(1i * (pf.theta0 + constants::pi));
    const std::complex<double> centre_n = circle.center / off;
    const double r_n = circle.radius / std::abs(off);
    const double phi0 = std::arg(1.0 - centre_n);
    const double qc0 = pf.q_loaded / r_n;
    const double inv_qi0 = 1.0 / pf.q_loaded - std::cos(phi0) / qc0;

    const double span = t.freq.back() - t.freq.front();
    if (span < 3.0 * pf.f_r / pf.q_loaded) {
        throw ValidationError("resonator_reflection_fit: trace spans fewer than 3 linewidths");
    }

    // Polish: x = [amplitude, alpha', tau*span, (f_r - f_ref)/span, 1e4/Q_i, |Q_c|, phi]
    // with the environment phase alpha' - 2 pi (f - f_ref) tau referenced to
    // f_ref so that alpha' and tau are nearly uncorrelated.
    const double f_ref = pf.f_r;
    auto wrap = [](double a) { return std::remainder(a, constants::two_pi); };
    detail::Vec x(7);
    x << std::abs(off), wrap(std::arg(off) - constants::two_pi * f_ref * tau), tau * span, 0.0,
        1e4 * inv_qi0, qc0, phi0;
    struct Parts {
        std::complex<double> env, m, s, dm_dql, dm_dx;
        double ql, x;
    };
    auto parts = [&](const detail::Vec& v, double f) {
        Parts q;
        const double fr = f_ref + v[3] * span;
        const double phase = v[1] - constants::two_pi * (f - f_ref) * (v[2] / span);
        q.env = v[0] * std::exp(1i * phase);
        q.ql = 1.0 / (1e-4 * v[4] + std::cos(v[6]) / v[5]);
        q.x = f / fr - 1.0;
        const std::complex<double> d = 1.0 + 2.0i * q.ql * q.x;
        const std::complex<double> e = (2.0 / v[5]) * std::exp(1i * v[6]);
        q.m = e * q.ql / d;
        q.s = q.env * (1.0 - q.m);
        q.dm_dql = e / (d * d);
        q.dm_dx = -e * q.ql * 2.0i * q.ql / (d * d);
        return q;
    };
    auto residual = [&](const detail::Vec& v) {
        detail::Vec r(static_cast<Eigen::Index>(2 * n));
        for (std::size_t i = 0; i < n; ++i) {
            const std::complex<double> d = parts(v, t.freq[i]).s - t.s21[i];
            r[static_cast<Eigen::Index>(2 * i)] = d.real();
            r[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
        }
        return r;
    };
    auto jacobian = [&](const detail::Vec& v) {
        detail::Mat j(static_cast<Eigen::Index>(2 * n), 7);
        const double fr = f_ref + v[3] * span;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = t.freq[i];
            const Parts q = parts(v, f);
            const double ql2 = q.ql * q.ql;
            const std::complex<double> col[7] = {
                q.s / v[0],
                1i * q.s,
                -1i * constants::two_pi * (f - f_ref) / span * q.s,
                -q.env * q.dm_dx * (-f / (fr * fr)) * span,
                -q.env * q.dm_dql * (-ql2 * 1e-4),
                -q.env * (q.dm_dql * ql2 * std::cos(v[6]) / (v[5] * v[5]) - q.m / v[5]),
                -q.env * (q.dm_dql * ql2 * std::sin(v[6]) / v[5] + 1i * q.m),
            };
            for (int k = 0; k < 7; ++k) {
                j(static_cast<Eigen::Index>(2 * i), k) = col[k].real();
                j(static_cast<Eigen::Index>(2 * i + 1), k) = col[k].imag();
            }
        }
        return j;
    };
    detail::LmOptions opt;
    opt.typical = {std::abs(off), 1.0, 1e-3, 1e-6, 1.0, qc0, 1.0};
    opt.x_tol = 1e-12;
    opt.f_tol = 1e-12;
    double mean_abs = 0.0;
    for (const auto& v : t.s21) mean_abs += std::norm(v);
    opt.cost_floor = 1e-30 * mean_abs;
    const auto lm = detail::levenberg_marquardt(residual, x, opt, jacobian);
    const auto se = lm.standard_errors();
    const detail::Vec& v = lm.params;

    FitResult out;
    out.converged = lm.converged;
    out.iterations = lm.iterations;
    out.residual_norm = std::sqrt(lm.cost);
    const double inv_qi = v[4] * 1e-4;
    const double q_c = v[5];
    const double phi = v[6];
    const double q_l = 1.0 / (inv_qi + std::cos(phi) / q_c);
    out.set("f0", f_ref + v[3] * span, se[3] * span);
    if (inv_qi > 0.0) {
        out.set("Q_i", 1.0 / inv_qi, se[4] * 1e-4 / (inv_qi * inv_qi));
    } else {
        out.set("Q_i", std::numeric_limits<double>::infinity(), 0.0);
        out.flags.push_back("internal_loss_unresolved");
    }
    out.set("Q_c", q_c, se[5]);
    out.set("phi", conjugated ? -phi : phi, se[6]);
    // dQ_l from the independent parts; correlation ignored.
    const double dql = q_l * q_l *
                       std::sqrt(std::pow(se[4] * 1e-4, 2) +
                                 std::pow(std::cos(phi) * se[5] / (q_c * q_c), 2) +
                                 std::pow(std::sin(phi) * se[6] / q_c, 2));
    out.set("Q_total", q_l, dql);
    out.set("amplitude", v[0], se[0]);
    const double tau_fit = v[2] / span;
    const double alpha = wrap(v[1] + constants::two_pi * f_ref * tau_fit);
    out.set("alpha", conjugated ? -alpha : alpha, se[1]);
    out.set("tau", conjugated ? -tau_fit : tau_fit, se[2] / span);
    if (conjugated) out.flags.push_back("conjugate_convention");
    if (!out.converged) out.flags.push_back("unreliable");
    return out;
}

/// ReflectionParams from a converged resonator fit.
inline ReflectionParams reflection_params(const FitResult& fit) {
    ReflectionParams p;
    p.f_r = fit.value("f0");
    p.q_i = fit.value("Q_i");
    p.q_c = fit.value("Q_c");
    p.phi = fit.value("phi");
    p.amplitude = fit.value("amplitude");
    p.alpha = fit.value("alpha");
    p.tau = fit.value("tau");
    return p;
}

/// Intracavity photons for a drive at f_drive with `power_at_port` watts,
/// using the fitted resonator and the same Hz normalization as the Kerr
/// model: n = kappa_c Phi / (2 pi (delta^2 + (kappa/2)^2)), kappa_c =
/// f0 cos(phi)/|Q_c|, kappa = f0 / Q_total.
inline double intracavity_photon_number(const FitResult& fit, double f_drive,
                                        double power_at_port) {
    if (!fit.reliable()) {
        throw ContractViolation("intracavity_photon_number: fit did not converge");
    }
    if (!(power_at_port >= 0.0)) throw DomainError("power must be >= 0");
    const double f0 = fit.value("f0");
    const double kappa_c = f0 * std::cos(fit.value("phi")) / fit.value("Q_c");
    const double kappa = f0 / fit.value("Q_total");
    const double detuning = f_drive - f0;
    const double flux = photon_flux(power_at_port, f_drive);
    return kappa_c * flux / (constants::two_pi * (detuning * detuning + 0.25 * kappa * kappa));
}

// ---------------------------------------------------------------------------
// Kerr slope
// ---------------------------------------------------------------------------

struct KerrPoint {
    double n;    // photons
    double f_r;  // Hz
};

/// Ordinary least squares f_r = f_r0 + K n. Parameters: K, f_r0.
inline FitResult kerr_slope_fit(const std::vector<KerrPoint>& points) {
    if (points.size() < 2) throw ValidationError("kerr_slope_fit: need at least 2 points");
    const double m = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.n;
        my += p.f_r;
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        sxx += (p.n - mx) * (p.n - mx);
        sxy += (p.n - mx) * (p.f_r - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("kerr_slope_fit: rank deficient (all n equal)");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0.0;
    for (const auto& p : points) {
        const double r = p.f_r - (intercept + slope * p.n);
        ss += r * r;
    }
    FitResult out;
    out.converged = true;
    out.residual_norm = std::sqrt(ss);
    const double dof = m - 2.0;
    if (dof > 0.0) {
        const double s2 = ss / dof;
        out.set("K", slope, std::sqrt(s2 / sxx));
        out.set("f_r0", intercept, std::sqrt(s2 * (1.0 / m + mx * mx / sxx)));
    } else {
        out.set("K", slope, 0.0);
        out.set("f_r0", intercept, 0.0);
        out.flags.push_back("no_residual_dof");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Double Lorentzian gain
// ---------------------------------------------------------------------------

struct LorentzianComponent {
    double amplitude;  // linear excess power at the peak
    double center;     // Hz
    double fwhm;       // Hz
};

/// Unit-peak Lorentzian 1 / (1 + (2 (f - f0) / df)^2).
inline double unit_lorentzian(double f, double center, double fwhm) {
    const double u = 2.0 * (f - center) / fwhm;
    return 1.0 / (1.0 + u * u);
}

/// Linear power gain 1 + A1 L(f; f1, df1) + A2 L(f; f2, df2).
/// Parameter order: A1, f1, df1, A2, f2, df2.
inline double double_lorentzian(double f, const std::array<double, 6>& p) {
    return 1.0 + p[0] * unit_lorentzian(f, p[1], p[2]) + p[3] * unit_lorentzian(f, p[4], p[5]);
}

/// Analytic d(model)/d(params) at each frequency, rows = frequencies.
inline detail::Mat double_lorentzian_jacobian(const std::vector<double>& freq,
                                              const std::array<double, 6>& p) {
    detail::Mat j(static_cast<Eigen::Index>(freq.size()), 6);
    for (std::size_t i = 0; i < freq.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (int c = 0; c < 2; ++c) {
            const double a = p[3 * c], f0 = p[3 * c + 1], df = p[3 * c + 2];
            const double u = 2.0 * (freq[i] - f0) / df;
            const double l = 1.0 / (1.0 + u * u);
            j(row, 3 * c) = l;
            j(row, 3 * c + 1) = a * 4.0 * u * l * l / df;
            j(row, 3 * c + 2) = a * 2.0 * u * u * l * l / df;
        }
    }
    return j;
}

namespace detail_fit {

struct LorentzFit {
    std::array<double, 6> p{};
    detail::LmResult lm;
};

inline LorentzFit lm_lorentz(const std::vector<double>& freq, const std::vector<double>& lin,
                             std::array<double, 6> init, bool two_components, int max_iter) {
    const std::size_t n = freq.size();
    const int np = two_components ? 6 : 3;
    auto to_full = [&](const detail::Vec& x) {
        std::array<double, 6> p{};
        for (int k = 0; k < np; ++k) p[k] = x[k];
        if (!two_components) p = {x[0], x[1], x[2], 0.0, x[1], x[2]};
        return p;
    };
    auto residual = [&](const detail::Vec& x) {
        const auto p = to_full(x);
        detail::Vec r(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            r[static_cast<Eigen::Index>(i)] = double_lorentzian(freq[i], p) - lin[i];
        }
        return r;
    };
    auto jacobian = [&](const detail::Vec& x) {
        const detail::Mat full = double_lorentzian_jacobian(freq, to_full(x));
        return detail::Mat(full.leftCols(np));
    };
    detail::Vec x(np);
    for (int k = 0; k < np; ++k) x[k] = init[k];
    detail::LmOptions opt;
    opt.max_iterations = max_iter;
    const double span = freq.back() - freq.front();
    opt.typical = {1.0, span, span, 1.0, span, span};
    opt.typical.resize(static_cast<std::size_t>(np));
    double mean2 = 0.0;
    for (double v : lin) mean2 += v * v;
    opt.cost_floor = 1e-28 * mean2;
    LorentzFit out;
    out.lm = detail::levenberg_marquardt(residual, x, opt, jacobian);
    out.p = to_full(out.lm.params);
    return out;
}

}  // namespace detail_fit

/// Two-component Lorentzian fit of a gain trace on linear power.
///
/// Initialization: the global peak seeds the narrow component (width from
/// the half-maximum crossings of the excess), the centroid and second
/// moment of the above-baseline excess seed the broad one. A one-component
/// fit is run alongside; when the second component does not pay for its
/// three parameters (BIC), or the two centres coincide within 5% of the
/// narrower width, the one-component result is reported with the flag
/// `single_component`. Component 1 is always the broader one.
///
/// Parameters: A1, f1, df1, A2, f2, df2, and the derived peak gains
/// G1_db = 10 log10(1 + A1), G2_db.
inline FitResult double_lorentzian_fit(const GainTrace& trace) {
    trace.validate(12);
    const std::size_t n = trace.freq.size();
    std::vector<double> lin(n), excess(n);
    std::size_t ipk = 0;
    for (std::size_t i = 0; i < n; ++i) {
        lin[i] = db_to_linear(trace.gain_db[i]);
        excess[i] = std::max(lin[i] - 1.0, 0.0);
        if (lin[i] > lin[ipk]) ipk = i;
    }
    if (!(trace.gain_db[ipk] >= 1.0)) {
        throw ValidationError("double_lorentzian_fit: peak less than 1 dB above baseline");
    }
    const auto& f = trace.freq;
    const double span = f.back() - f.front();

    // Narrow component from the peak's own half-maximum width.
    const double half = 0.5 * excess[ipk];
    std::size_t il = ipk, ir = ipk;
    while (il > 0 && excess[il] > half) --il;
    while (ir + 1 < n && excess[ir] > half) ++ir;
    const double df_peak = std::max(f[ir] - f[il], 2.0 * span / static_cast<double>(n));

    // Broad component from moments of the excess.
    double mass = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double w = 0.5 * (excess[i] + excess[i + 1]) * (f[i + 1] - f[i]);
        mass += w;
        m1 += w * 0.5 * (f[i] + f[i + 1]);
    }
    const double centroid = mass > 0.0 ? m1 / mass : f[ipk];
    double m2 = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double w = 0.5 * (excess[i] + excess[i + 1]) * (f[i + 1] - f[i]);
        const double d = 0.5 * (f[i] + f[i + 1]) - centroid;
        m2 += w * d * d;
    }
    const double sigma = mass > 0.0 ? std::sqrt(m2 / mass) : df_peak;
    const double df_broad = std::max(2.0 * sigma, 2.0 * df_peak);
    // Unit-peak Lorentzian area is (pi/2) fwhm.
    const double a_broad = std::min(mass / (0.5 * constants::pi * df_broad), 0.5 * excess[ipk]);
    const double a_narrow =
        std::max(excess[ipk] - a_broad * unit_lorentzian(f[ipk], centroid, df_broad),
                 0.1 * excess[ipk]);

    const auto single = detail_fit::lm_lorentz(
        f, lin, {excess[ipk], f[ipk], df_peak, 0.0, 0.0, 0.0}, false, 500);

    // Two starting points: the moment-based split and a split around the
    // one-component solution.
    std::vector<detail_fit::LorentzFit> doubles;
    doubles.push_back(detail_fit::lm_lorentz(
        f, lin, {a_broad, centroid, df_broad, a_narrow, f[ipk], df_peak}, true, 500));
    {
        const auto& s = single.p;
        doubles.push_back(detail_fit::lm_lorentz(
            f, lin, {0.5 * s[0], s[1], 3.0 * s[2], 0.5 * s[0], s[1], 0.5 * s[2]}, true, 500));
    }
    const detail_fit::LorentzFit* best = nullptr;
    for (const auto& d : doubles) {
        if (!d.lm.converged) continue;
        if (!(d.p[2] > 0.0 && d.p[5] > 0.0)) continue;
        if (!best || d.lm.cost < best->lm.cost) best = &d;
    }

    FitResult out;
    auto report = [&](const detail_fit::LorentzFit& fit, bool two) {
        auto p = fit.p;
        std::vector<double> se = fit.lm.standard_errors();
        se.resize(6, 0.0);
        p[2] = std::abs(p[2]);
        p[5] = std::abs(p[5]);
        if (two && p[5] > p[2]) {
            std::swap_ranges(p.begin(), p.begin() + 3, p.begin() + 3);
            std::swap_ranges(se.begin(), se.begin() + 3, se.begin() + 3);
        }
        const char* names[6] = {"A1", "f1", "df1", "A2", "f2", "df2"};
        for (int k = 0; k < 6; ++k) out.set(names[k], p[k], se[k]);
        out.set("G1_db", linear_to_db(1.0 + p[0]), se[0] / ((1.0 + p[0]) * std::log(10.0)) * 10.0);
        out.set("G2_db", linear_to_db(1.0 + p[3]), se[3] / ((1.0 + p[3]) * std::log(10.0)) * 10.0);
        out.residual_norm = std::sqrt(fit.lm.cost);
        out.iterations = fit.lm.iterations;
        out.converged = fit.lm.converged;
    };

    double mean2 = 0.0;
    for (double v : lin) mean2 += v * v;
    const double floor = 1e-24 * mean2;
    bool use_double = false;
    if (best) {
        const double c1 = std::max(single.lm.cost, floor);
        const double c2 = std::max(best->lm.cost, floor);
        const double dn = static_cast<double>(n);
        const bool pays = dn * std::log(c1 / c2) > 3.0 * std::log(dn);
        const double min_df = std::min(std::abs(best->p[2]), std::abs(best->p[5]));
        const bool overlap = std::abs(best->p[1] - best->p[4]) < 0.05 * min_df;
        const bool negligible = std::min(best->p[0], best->p[3]) <= 0.0;
        if (pays && !overlap && !negligible) {
            use_double = true;
        } else if (overlap) {
            out.flags.push_back("degenerate_overlap");
        }
    }
    if (use_double) {
        report(*best, true);
    } else {
        if (!single.lm.converged) {
            throw ConvergenceError("double_lorentzian_fit: no convergence after 500 iterations",
                                   "A=" + std::to_string(single.p[0]) +
                                       " f=" + std::to_string(single.p[1]) +
                                       " df=" + std::to_string(single.p[2]));
        }
        report(single, false);
        out.flags.push_back("single_component");
    }
    if (!out.converged) out.flags.push_back("unreliable");
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum SNR
// ---------------------------------------------------------------------------

/// SNR (dB) of a tone: peak power within one bin of f_signal minus the
/// median power over the noise band. Bins within one bin of the signal are
/// excluded from the noise band.
inline double spectrum_snr(const Spectrum& s, double f_signal,
                           std::pair<double, double> noise_band) {
    if (s.freq.size() != s.power_dbm.size() || s.freq.empty()) {
        throw ValidationError("spectrum_snr: malformed spectrum");
    }
    if (!(f_signal >= s.freq.front() && f_signal <= s.freq.back())) {
        throw ValidationError("spectrum_snr: f_signal outside the spectrum");
    }
    const auto it = std::lower_bound(s.freq.begin(), s.freq.end(), f_signal);
    std::size_t k = static_cast<std::size_t>(it - s.freq.begin());
    if (k > 0 && (k == s.freq.size() || f_signal - s.freq[k - 1] < s.freq[k] - f_signal)) --k;
    const std::size_t lo = k > 0 ? k - 1 : k;
    const std::size_t hi = std::min(k + 1, s.freq.size() - 1);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i <= hi; ++i) peak = std::max(peak, s.power_dbm[i]);

    std::vector<double> noise;
    const double a = std::min(noise_band.first, noise_band.second);
    const double b = std::max(noise_band.first, noise_band.second);
    for (std::size_t i = 0; i < s.freq.size(); ++i) {
        if (i >= lo && i <= hi) continue;
        if (s.freq[i] >= a && s.freq[i] <= b) noise.push_back(s.power_dbm[i]);
    }
    if (noise.empty()) throw ValidationError("spectrum_snr: empty noise band");
    const std::size_t mid = noise.size() / 2;
    std::nth_element(noise.begin(), noise.begin() + mid, noise.end());
    double median = noise[mid];
    if (noise.size() % 2 == 0) {
        const double lower = *std::max_element(noise.begin(), noise.begin() + mid);
        median = 0.5 * (median + lower);
    }
    return peak - median;
}

}  // namespace paramp::fit

#endif  // PARAMP_FITTING_HPP
