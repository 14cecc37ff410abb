#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "paramp/fitting.hpp"
#include "paramp/kerr_dynamics.hpp"

using namespace paramp;
using namespace paramp::kerr;

namespace {

KerrMode reference_mode() { return KerrMode::from_quality_factors(6.4e9, 50.0, 4000.0, -20e3); }

/// Random mode with rates spanning a few decades and either sign of K.
KerrMode random_mode(std::mt19937_64& rng, bool lossless) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    KerrMode m;
    m.f0 = 4e9 + 4e9 * u(rng);
    m.kappa_c = std::pow(10.0, 6.0 + 2.3 * u(rng));
    m.kappa_i = lossless ? 0.0 : m.kappa_c * std::pow(10.0, -3.0 + 3.0 * u(rng));
    m.kerr = (u(rng) < 0.5 ? -1.0 : 1.0) * std::pow(10.0, 2.0 + 3.0 * u(rng));
    return m;
}

}  // namespace

TEST(SteadyState, MatchesCompanionMatrixOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0, three = 0;
    while (checked < 1500) {
        const KerrMode m = random_mode(rng, false);
        const double kappa = m.kappa();
        const double delta = kappa * (-6.0 + 12.0 * u(rng));
        const double drive = std::pow(10.0, -4.0 + 6.0 * u(rng)) * kappa * kappa * kappa /
                             std::abs(m.kerr);
        bool ambiguous = false;
        const auto want = oracle::kerr_cubic_roots(m.kerr, delta, kappa, drive, &ambiguous);
        if (ambiguous) continue;  // numerically at a fold; the root count is ill-posed there
        const auto got = steady_state_photon_numbers(m, delta, drive);
        ASSERT_EQ(got.size(), want.size()) << "delta=" << delta << " drive=" << drive;
        ASSERT_TRUE(got.size() == 1 || got.size() == 3);
        for (std::size_t k = 0; k < got.size(); ++k) {
            EXPECT_NEAR(got[k] / want[k], 1.0, 1e-10);
            EXPECT_LT(steady_state_relative_residual(m, delta, got[k], drive), 1e-10);
        }
        if (got.size() == 3) {
            ++three;
            EXPECT_GT(stability_determinant(m, delta, got[0]), 0.0);
            EXPECT_LT(stability_determinant(m, delta, got[1]), 0.0);
            EXPECT_GT(stability_determinant(m, delta, got[2]), 0.0);
        }
        ++checked;
    }
    EXPECT_GT(three, 50);
}

TEST(SteadyState, LinearAndZeroDrive) {
    KerrMode m = reference_mode();
    EXPECT_EQ(steady_state_photon_numbers(m, 1e6, 0.0), std::vector<double>{0.0});
    m.kerr = 0.0;
    const auto n = steady_state_photon_numbers(m, 3e6, 1e15);
    ASSERT_EQ(n.size(), 1u);
    EXPECT_NEAR(n[0], 1e15 / (9e12 + 0.25 * m.kappa() * m.kappa()), 1e-9);
    EXPECT_THROW(steady_state_photon_numbers(m, 0.0, -1.0), DomainError);
}

TEST(SteadyState, PumpStatesUseHzNormalizedDrive) {
    const KerrMode m = reference_mode();
    const double p = dbm_to_watts(-90.0), fp = 6.35e9;
    const auto st = pump_steady_states(m, fp, p);
    const double drive = m.kappa_c * p / (constants::planck * fp) / constants::two_pi;
    for (const auto& b : st.branches) {
        EXPECT_LT(steady_state_relative_residual(m, m.f0 - fp, b.n, drive), 1e-12);
    }
}

TEST(Threshold, MatchesClosedFormAndDoubleRoot) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const KerrMode m = random_mode(rng, false);
        const double kappa = m.kappa();
        const auto thr = bistability_threshold(m);
        // Oracle: bisection for the detuning at which d(lhs)/dn acquires a
        // double root, on the side opposite to K.
        const double sgn = m.kerr > 0.0 ? 1.0 : -1.0;
        auto disc = [&](long double d) {
            const long double k = m.kerr, hk = 0.5L * kappa;
            return 16.0L * d * d * k * k - 12.0L * k * k * (d * d + hk * hk);
        };
        long double lo = 0.0L, hi = -sgn * 10.0L * kappa;
        for (int it = 0; it < 200; ++it) {
            const long double mid = 0.5L * (lo + hi);
            if (disc(mid) < 0) lo = mid;
            else hi = mid;
        }
        const double delta_crit = static_cast<double>(0.5L * (lo + hi));
        const double n_crit = -2.0 * delta_crit / (3.0 * m.kerr);
        EXPECT_NEAR(thr.delta_crit / delta_crit, 1.0, 1e-6);
        EXPECT_NEAR(thr.n_crit / n_crit, 1.0, 1e-6);
        EXPECT_NEAR(thr.n_crit, kappa / (std::sqrt(3.0) * std::abs(m.kerr)), 1e-9 * thr.n_crit);

        // Dimensionless cubic u^3 + 2 s d u^2 + (d^2 + 1/4) u - c at the
        // critical point has vanishing discriminant.
        const long double d = thr.delta_crit / kappa, s = sgn;
        const long double uc = thr.n_crit * std::abs(m.kerr) / kappa;
        const long double c = uc * ((d + s * uc) * (d + s * uc) + 0.25L);
        const long double b2 = 2 * s * d, b1 = d * d + 0.25L;
        const long double dd = oracle::cubic_discriminant(1, b2, b1, -c);
        const long double scale = b2 * b2 * b1 * b1 + 4 * b1 * b1 * b1 + 27 * c * c;
        EXPECT_LT(std::fabs(dd) / scale, 1e-6);
    }
    KerrMode lin = reference_mode();
    lin.kerr = 0.0;
    EXPECT_THROW(bistability_threshold(lin), DomainError);
}

TEST(Threshold, TurningPointEndsLowerBranch) {
    const KerrMode m = reference_mode();
    const double delta = 2.0 * bistability_threshold(m).delta_crit;
    const auto tp = lower_turning_point(m, delta);
    ASSERT_TRUE(tp.has_value());
    EXPECT_NEAR(stability_determinant(m, delta, tp->n), 0.0, 1e-9 * m.kappa() * m.kappa());
    EXPECT_EQ(steady_state_photon_numbers(m, delta, tp->drive * 0.999).size(), 3u);
    EXPECT_EQ(steady_state_photon_numbers(m, delta, tp->drive * 1.001).size(), 1u);
    EXPECT_FALSE(lower_turning_point(m, -delta).has_value());
}

TEST(Gain, MatchesClosedFormDeterminant) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const KerrMode m = random_mode(rng, false);
        const double kappa = m.kappa();
        const double delta = kappa * (-5.0 + 10.0 * u(rng));
        const double n = u(rng) * kappa / std::abs(m.kerr);
        const double w = kappa * (-3.0 + 6.0 * u(rng));
        const auto got = gain_at(m, delta, n, w);
        const auto want = oracle::closed_form_gain(m.kappa_c, kappa, m.kerr, delta, n, w);
        EXPECT_LT(std::abs(got.signal - want.signal), 1e-12 * std::max(1.0, std::abs(want.signal)));
        EXPECT_LT(std::abs(got.idler - want.idler), 1e-12 * std::max(1.0, std::abs(want.idler)));
    }
}

TEST(Gain, SymplecticWhenLossless) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int checked = 0;
    while (checked < 1000) {
        const KerrMode m = random_mode(rng, true);
        const double fp = m.f0 - m.kappa() * (-4.0 + 8.0 * u(rng));
        const double drive = std::pow(10.0, -3.0 + 3.0 * u(rng)) * std::pow(m.kappa(), 3) /
                             std::abs(m.kerr);
        const auto st = pump_steady_states(m, fp, power_for_drive(m, fp, drive));
        for (const auto& b : st.branches) {
            if (!b.stable) continue;
            const double fs = fp + m.kappa() * (-2.0 + 4.0 * u(rng));
            const auto g = signal_idler_gain(m, st, b, fs);
            worst = std::max(worst, std::abs(std::norm(g.signal) - std::norm(g.idler) - 1.0));
            ++checked;
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(Gain, UndrivenReflection) {
    KerrMode m = reference_mode();
    m.kappa_i = 0.0;
    const auto st = pump_steady_states(m, m.f0, 0.0);
    for (double fs : {6.3e9, 6.4e9, 6.45e9}) {
        const auto g = signal_idler_gain(m, st, fs);
        EXPECT_NEAR(std::abs(g.signal), 1.0, 1e-14);
        EXPECT_EQ(std::abs(g.idler), 0.0);
    }
    const KerrMode lossy = reference_mode();
    const auto st2 = pump_steady_states(lossy, lossy.f0, 0.0);
    const auto prof = gain_profile(lossy, st2, lossy.f0 - 2e8, lossy.f0 + 2e8, 401);
    std::size_t imin = 0;
    for (std::size_t i = 0; i < prof.freq.size(); ++i) {
        EXPECT_LT(std::abs(prof.signal_gain[i]), 1.0);
        if (std::abs(prof.signal_gain[i]) < std::abs(prof.signal_gain[imin])) imin = i;
    }
    EXPECT_EQ(prof.freq[imin], lossy.f0);
}

TEST(Gain, LinearModeIsResonatorReflection) {
    KerrMode m = reference_mode();
    m.kerr = 0.0;
    fit::ReflectionParams p;
    p.f_r = m.f0;
    p.q_c = m.f0 / m.kappa_c;
    p.q_i = m.f0 / m.kappa_i;
    for (double p_dbm : {-200.0, -120.0, -80.0, -40.0}) {
        const auto st = pump_steady_states(m, 6.39e9, dbm_to_watts(p_dbm));
        for (double fs : {6.2e9, 6.395e9, 6.4e9, 6.41e9, 6.6e9}) {
            // The model uses the exp(-i w t) convention, the line shape
            // exp(+i w t): the two are complex conjugates.
            const auto g = signal_idler_gain(m, st, fs).signal;
            const auto r = std::conj(fit::reflection_model(fs, p));
            EXPECT_LT(std::abs(g - r), 1e-12);
        }
    }
}

TEST(Gain, UnstableBranchIsRejected) {
    const KerrMode m = reference_mode();
    const double delta = 2.0 * bistability_threshold(m).delta_crit;
    const auto tp = lower_turning_point(m, delta);
    ASSERT_TRUE(tp);
    const double fp = m.f0 - delta;
    const auto st = pump_steady_states(m, fp, power_for_drive(m, fp, 0.999 * tp->drive));
    ASSERT_EQ(st.branches.size(), 3u);
    EXPECT_FALSE(st.branches[1].stable);
    EXPECT_THROW(signal_idler_gain(m, st, st.branches[1], fp + 1e6), ContractViolation);
}

TEST(Gain, PeakGrowsTowardsTurningPoint) {
    const KerrMode m = reference_mode();
    const auto op = optimal_pump_search(m, 20.0);
    const double delta = m.f0 - op.point.f_pump;
    const auto tp = lower_turning_point(m, delta);
    ASSERT_TRUE(tp);
    std::vector<double> g;
    for (int k = 0; k < 50; ++k) {
        const double drive = tp->drive * (0.5 + 0.4999 * k / 49.0);
        const double n = steady_state_photon_numbers(m, delta, drive).front();
        g.push_back(peak_gain_linear(m, delta, n));
    }
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    EXPECT_GT(g.back(), 100.0);
}

TEST(PumpSearch, ReferenceOperatingPoint) {
    const KerrMode m = reference_mode();
    const auto op = optimal_pump_search(m, 20.0);
    EXPECT_GE(op.profile.peak_gain_db, 19.5);
    EXPECT_LE(op.profile.peak_gain_db, 20.5);
    EXPECT_TRUE(op.profile.reliable);
    const auto thr = bistability_threshold(m);
    const double delta = m.f0 - op.point.f_pump;
    EXPECT_GT(delta * thr.delta_crit, 0.0);
    EXPECT_GE(std::abs(delta), std::abs(thr.delta_crit));
    // Frozen values of the documented grid search.
    EXPECT_NEAR(op.point.f_pump, 6.287763e9, 2e3);
    EXPECT_NEAR(watts_to_dbm(op.point.power), -83.72, 0.01);
    EXPECT_NEAR(op.profile.gbw, 122.3e6, 0.2e6);
    EXPECT_GT(op.profile.gbw, 0.85 * m.kappa_c);
    EXPECT_LT(op.profile.gbw, 1.15 * m.kappa_c);
}

TEST(PumpSearch, ZeroTargetAndUnreachable) {
    const KerrMode m = reference_mode();
    const auto zero = optimal_pump_search(m, 0.0);
    EXPECT_EQ(zero.point.power, 0.0);
    EXPECT_FALSE(zero.profile.reliable);
    KerrMode lin = m;
    lin.kerr = 0.0;
    EXPECT_THROW(optimal_pump_search(lin, 20.0), NotFoundError);
    EXPECT_THROW(optimal_pump_search(m, 45.0), DomainError);
}

TEST(GainProfile, RefinementInvariant) {
    const KerrMode m = reference_mode();
    const auto op = optimal_pump_search(m, 20.0);
    const double half = 0.4 * m.kappa();
    const auto coarse = gain_profile(m, op.state, op.point.f_pump - half, op.point.f_pump + half, 801);
    const auto fine = gain_profile(m, op.state, op.point.f_pump - half, op.point.f_pump + half, 8001);
    ASSERT_TRUE(coarse.reliable && fine.reliable);
    // 801 points over 0.8 kappa already sample the FWHM more than 10 times.
    EXPECT_GT(coarse.fwhm / (coarse.freq[1] - coarse.freq[0]), 10.0);
    EXPECT_NEAR(coarse.peak_gain_db / fine.peak_gain_db, 1.0, 0.01);
    EXPECT_NEAR(coarse.fwhm / fine.fwhm, 1.0, 0.01);
    EXPECT_NEAR(coarse.gbw / fine.gbw, 1.0, 0.01);
}

TEST(GainProfile, EdgeCases) {
    const KerrMode m = reference_mode();
    const auto st = pump_steady_states(m, m.f0, 0.0);
    const auto p = gain_profile(m, st, 6.3e9, 6.5e9, 101);
    EXPECT_FALSE(p.reliable);
    EXPECT_LE(p.peak_gain_db, 0.0);
    EXPECT_THROW(gain_profile(m, st, 6.5e9, 6.3e9, 101), DomainError);
    EXPECT_THROW(gain_profile(m, st, 6.3e9, 6.5e9, 2), DomainError);

    // A window that stops short of the peak is flagged.
    const auto op = optimal_pump_search(m, 20.0);
    const double fpk = op.profile.peak_freq;
    const auto edge = gain_profile(m, op.state, fpk - 50e6, fpk - 20e6, 201);
    EXPECT_FALSE(edge.reliable);
}

TEST(Compression, WeakSignalAndMonotoneTail) {
    const KerrMode m = reference_mode();
    const auto op = optimal_pump_search(m, 20.0);
    const double fs = op.point.f_pump + 1e3;
    std::vector<double> powers;
    for (int k = 0; k < 111; ++k) powers.push_back(dbm_to_watts(-150.0 + 0.5 * k));
    CompressionSettings cfg;
    cfg.skip_unconverged = true;
    const auto sw = compression_sweep(m, op.point.f_pump, op.point.power, fs, powers, cfg);
    ASSERT_EQ(sw.points.size(), powers.size());
    EXPECT_NEAR(sw.small_signal_gain_db, 20.0, 0.05);
    EXPECT_NEAR(sw.points.front().gain_db, sw.small_signal_gain_db, 0.02);

    const double weak = compression_point(m, op.point.f_pump, op.point.power, fs, 1e-30).gain_db;
    EXPECT_NEAR(weak, sw.small_signal_gain_db, 1e-6);

    const double n_crit = bistability_threshold(m).n_crit;
    const CompressionPoint* prev = nullptr;
    int tail = 0;
    for (const auto& p : sw.points) {
        if (!p.converged || p.n_signal < 0.1 * n_crit) continue;
        if (prev) {
            EXPECT_LE(p.gain_db, prev->gain_db + 1e-9) << p.signal_power;
        }
        prev = &p;
        ++tail;
    }
    EXPECT_GT(tail, 20);
    ASSERT_TRUE(sw.p1db.has_value());
    EXPECT_NEAR(watts_to_dbm(*sw.p1db), -115.64, 0.05);
}

TEST(Compression, NonConvergenceCarriesLastIterate) {
    const KerrMode m = reference_mode();
    const auto op = optimal_pump_search(m, 20.0);
    CompressionSettings cfg;
    cfg.max_iterations = 2;
    try {
        compression_point(m, op.point.f_pump, op.point.power, op.point.f_pump + 1e3,
                          dbm_to_watts(-110.0), cfg);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
        EXPECT_NE(e.last_iterate().find("n_pump="), std::string::npos);
    }
    EXPECT_THROW(compression_sweep(m, op.point.f_pump, op.point.power, op.point.f_pump + 1e3,
                                   {dbm_to_watts(-110.0)}, cfg),
                 ConvergenceError);
}

TEST(Noise, QuantumLimit) {
    EXPECT_NEAR(quantum_limit_temperature(6.3139e9), 0.30301941, 1e-8);
    EXPECT_NEAR(quantum_limit_temperature(5.862e9), 0.28133163, 1e-8);
    EXPECT_NEAR(quantum_limit_temperature(12e9) / quantum_limit_temperature(6e9), 2.0, 1e-15);
    EXPECT_THROW(quantum_limit_temperature(0.0), DomainError);
}

TEST(Noise, SnrImprovement) {
    const double f = 6.3139e9, th = 2.2;
    EXPECT_EQ(snr_improvement(0.0, th, f), 0.0);
    const double asym = snr_improvement_asymptote(th, f);
    EXPECT_NEAR(asym, 9.16994, 1e-4);
    const double g15 = snr_improvement(15.0, th, f);
    const double tq = quantum_limit_temperature(f), g = std::pow(10.0, 1.5);
    EXPECT_NEAR(g15, 10.0 * std::log10(g * (tq + th) / (g * tq + th)), 1e-12);
    EXPECT_GT(g15, 0.0);
    EXPECT_LT(g15, asym);
    double prev = -1.0;
    for (int k = 0; k <= 60; ++k) {
        const double v = snr_improvement(k, th, f);
        EXPECT_GT(v, prev);
        EXPECT_LT(v, asym);
        prev = v;
    }
    EXPECT_THROW(snr_improvement(-1.0, th, f), DomainError);
    EXPECT_THROW(snr_improvement(10.0, 0.0, f), DomainError);
}
