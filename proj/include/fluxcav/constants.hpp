#pragma once

#include <numbers>

// CODATA 2018 exact SI values.
namespace fluxcav::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double h = 6.62607015e-34;
inline constexpr double hbar = h / (2.0 * pi);
inline constexpr double e = 1.602176634e-19;
inline constexpr double k_b = 1.380649e-23;

// Reduced flux quantum hbar/2e.
inline constexpr double phi0 = hbar / (2.0 * e);
// Resistance quantum h/e^2.
inline constexpr double r_k = h / (e * e);

inline constexpr double ghz = 1e9;

// Energy in joules for a value/h given in GHz.
constexpr double ghz_to_joule(double f_ghz) { return h * f_ghz * ghz; }
// Angular frequency in rad/s for a frequency in GHz.
constexpr double ghz_to_angular(double f_ghz) { return 2.0 * pi * f_ghz * ghz; }

} // namespace fluxcav::constants
