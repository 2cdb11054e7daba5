#pragma once

#include "qoct/fit.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qoct {

struct SpectrumTrace {
    std::vector<double> omega;      // units of omega_p
    std::vector<double> magnitude;  // unitary DFT magnitude, one-sided
    double omega_p = 0.0;           // rad/s
};

// Returns the grid step; throws std::invalid_argument for fewer than two
// points or a non-uniform grid (relative tolerance 1e-6).
double uniform_step(std::span<const double> x);

SpectrumTrace dft_magnitude(std::span<const double> tau, std::span<const double> values, double omega_p);
// Mean of the per-run magnitude spectra. Runs whose carrier phase wanders
// must be averaged here, not as traces.
SpectrumTrace mean_dft_magnitude(std::span<const double> tau, const std::vector<std::vector<double>>& runs,
                                 double omega_p);
// sum |x|^2 and the matching two-sided spectral energy of the unitary DFT.
double signal_energy(std::span<const double> values);
double spectral_energy(std::span<const double> values);

// Zero every DFT bin above cutoff * omega_p and transform back.
std::vector<double> lowpass_extract(std::span<const double> tau, std::span<const double> values, double omega_p,
                                    double cutoff = 0.015);

// |analytic signal| of the mean-removed trace. Throws when the trace has no
// carrier (dominant frequency within the lowest bins).
std::vector<double> analytic_envelope(std::span<const double> values);

struct FeatureFit {
    double center = 0.0;
    double sigma = 0.0;
    double amplitude = 0.0;  // >= 0
    double offset = 0.0;
    int sign = -1;           // -1 dip, +1 peak
    double fwhm = 0.0;
    double center_error = 0.0, sigma_error = 0.0, amplitude_error = 0.0, offset_error = 0.0;
    FitResult fit;
};

// offset + sign * amplitude * exp(-(x - center)^2 / (2 sigma^2)).
FeatureFit fit_gaussian_feature(std::span<const double> x, std::span<const double> y,
                                std::span<const double> sqrt_weights = {});

// Gaussian peak of a single-count spectrum over [lo, hi] (units of omega_p);
// center and sigma come back in units of omega_p.
FeatureFit fit_spectral_peak(const SpectrumTrace& spec, double lo = 0.1, double hi = 0.9);

struct SincFit {
    double center = 0.0;
    double k = 0.0;  // envelope = amplitude |sin(k(x-c)) / (k(x-c))| + offset
    double amplitude = 0.0;
    double offset = 0.0;
    double fwhm = 0.0;
    double residual_norm = 0.0;
    double gaussian_residual_norm = 0.0;  // a Gaussian fitted to the same envelope
    std::vector<double> envelope;
    FitResult fit;
};

SincFit fit_sinc_envelope(std::span<const double> x, std::span<const double> y);

struct TwoGaussianSpectralFit {
    double c = 0.0, a1 = 0.0, a2 = 0.0;
    double sigma1 = 0.0, sigma2 = 0.0;  // units of omega_p
    double c_error = 0.0, a1_error = 0.0, a2_error = 0.0, sigma1_error = 0.0, sigma2_error = 0.0;
    bool sigma1_fixed = false;
    FitResult fit;
};

// c + a1 exp(-(w - 1/2)^2 / 2 s1^2) + a2 exp(-(w - 1)^2 / 2 s2^2) over the
// window [lo, hi] (units of omega_p).
TwoGaussianSpectralFit fit_two_gaussian_spectrum(const SpectrumTrace& spec,
                                                 std::optional<double> sigma1_fixed = std::nullopt,
                                                 double lo = 0.2, double hi = 1.4);
double two_gaussian_model(double w, double c, double a1, double a2, double s1, double s2);

// Savitzky-Golay smoothing with a window given in the units of x. The
// window is rounded to an odd number of samples; edge points use the
// polynomial fitted to the first/last full window, so polynomials up to
// `order` are reproduced everywhere.
std::vector<double> savgol_smooth(std::span<const double> x, std::span<const double> y, double window_length,
                                  int order = 3);

struct Envelopes {
    std::vector<double> upper, lower;
    bool single_run = false;  // min == max
};

// Standardise each trace (subtract mean, divide by std, restore the global
// mean std and mean), take pointwise max/min, then smooth both.
Envelopes envelope_minmax(std::span<const double> x, const std::vector<std::vector<double>>& traces,
                          double window_length, int order = 3);

}  // namespace qoct
