#ifndef PARAMP_DETAIL_ROOTS_HPP
#define PARAMP_DETAIL_ROOTS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "paramp/error.hpp"

namespace paramp::detail {

inline std::string format_bracket(double lo, double hi) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.17g, %.17g]", lo, hi);
    return buf;
}

/// Root of `f` on [lo, hi] where f(lo) and f(hi) have opposite signs.
/// Bisection safeguarded, with Illinois-style secant steps whenever they
/// land inside the current bracket. Stops when the bracket is narrower than
/// `x_tol` or |f| drops below `f_tol`.
template <class F>
double bracketed_root(F&& f, double lo, double hi, double x_tol, double f_tol = 0.0,
                      int max_iter = 400) {
    double f_lo = f(lo);
    double f_hi = f(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if (!(std::signbit(f_lo) != std::signbit(f_hi)) || std::isnan(f_lo) || std::isnan(f_hi)) {
        throw NumericalError("root not bracketed in " + format_bracket(lo, hi));
    }
    int stale_side = 0;
    for (int it = 0; it < max_iter; ++it) {
        const double width = hi - lo;
        if (std::abs(width) <= x_tol) break;

        // Secant on the bracket endpoints; fall back to the midpoint when the
        // interpolant leaves the central 90% of the bracket.
        double x = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        const double margin = 0.05 * width;
        if (!std::isfinite(x) || x <= lo + margin || x >= hi - margin || it % 4 == 3) {
            x = 0.5 * (lo + hi);
        }
        const double fx = f(x);
        if (fx == 0.0 || std::abs(fx) < f_tol) return x;
        if (std::signbit(fx) == std::signbit(f_lo)) {
            lo = x;
            f_lo = fx;
            if (stale_side == -1) f_hi *= 0.5;
            stale_side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if (stale_side == 1) f_lo *= 0.5;
            stale_side = 1;
        }
    }
    return std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
}

/// Real roots of the monic cubic x^3 + a x^2 + b x + c, ascending, each
/// polished with Newton steps. Returns 1 or 3 values (a double root is
/// returned twice).
inline std::vector<double> monic_cubic_real_roots(double a, double b, double c) {
    const double a3 = a / 3.0;
    const double p = b - a * a3;
    const double q = 2.0 * a3 * a3 * a3 - a3 * b + c;
    const double half_q = 0.5 * q;
    const double third_p = p / 3.0;
    const double disc = half_q * half_q + third_p * third_p * third_p;

    std::vector<double> roots;
    if (disc > 0.0) {
        const double s = std::sqrt(disc);
        // Avoid cancellation in -q/2 +- sqrt(disc).
        const double u = std::cbrt(-half_q + (half_q <= 0.0 ? s : -s));
        const double v = (u != 0.0) ? -third_p / u : 0.0;
        roots.push_back(u + v - a3);
    } else if (p == 0.0) {
        roots.assign(3, -a3);
    } else {
        const double m = 2.0 * std::sqrt(-third_p);
        const double arg = std::clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        constexpr double two_pi_3 = 2.0943951023931954923;
        for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(phi - two_pi_3 * k) - a3);
    }

    for (double& x : roots) {
        for (int it = 0; it < 4; ++it) {
            const double fx = ((x + a) * x + b) * x + c;
            const double dfx = (3.0 * x + 2.0 * a) * x + b;
            if (dfx == 0.0) break;
            const double step = fx / dfx;
            const double next = x - step;
            const double f_next = ((next + a) * next + b) * next + c;
            if (!(std::abs(f_next) < std::abs(fx))) break;
            x = next;
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace paramp::detail

#endif  // PARAMP_DETAIL_ROOTS_HPP
