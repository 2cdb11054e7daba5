#pragma once

#include <cmath>
#include <numbers>

// Canonical internal units: angular frequency in rad/s, time in s, length in m.
// Everything else is converted at the I/O boundary.
namespace qoct::units {

inline constexpr double c = 299792458.0;  // m/s
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// FWHM of a Gaussian in units of its standard deviation.
inline const double fwhm_per_sigma = 2.0 * std::sqrt(2.0 * std::log(2.0));

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double mm = 1e-3;

inline double wavelength_to_omega(double lambda_m) { return two_pi * c / lambda_m; }
inline double omega_to_wavelength(double omega) { return two_pi * c / omega; }

// Cyclic frequency (Hz) to angular frequency.
inline constexpr double hz_to_omega(double f) { return two_pi * f; }

// The interferogram x-axis is the one-way displacement of the reference
// mirror; a displacement x changes the optical delay by 2x/c.
inline constexpr double mirror_to_delay(double x_m) { return 2.0 * x_m / c; }
inline constexpr double delay_to_mirror(double tau_s) { return 0.5 * c * tau_s; }

// Width conversion for a band of width dlambda centred at lambda (small-band
// Jacobian |d omega / d lambda| = 2 pi c / lambda^2).
inline double wavelength_width_to_omega(double lambda_m, double dlambda_m) {
    return two_pi * c * dlambda_m / (lambda_m * lambda_m);
}

}  // namespace qoct::units
