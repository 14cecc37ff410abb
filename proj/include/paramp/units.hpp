#ifndef PARAMP_UNITS_HPP
#define PARAMP_UNITS_HPP

#include <cmath>
#include <limits>
#include <numbers>

namespace paramp {

/// CODATA 2018 exact SI constants.
namespace constants {
inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double boltzmann = 1.380649e-23;          // J / K
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double flux_quantum = planck / (2.0 * elementary_charge);  // Wb
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

/// Zero watts maps to -inf dBm.
inline double watts_to_dbm(double watts) {
    if (watts <= 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(watts / 1e-3);
}

/// Photons per second carried by a tone of the given power.
inline double photon_flux(double watts, double frequency_hz) {
    return watts / (constants::planck * frequency_hz);
}

}  // namespace paramp

#endif  // PARAMP_UNITS_HPP
