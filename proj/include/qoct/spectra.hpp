#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qoct {

struct GaussianSpectrum {
    double center = 0.0;  // rad/s
    double std = 0.0;     // rad/s

    void validate() const;
};

struct SpdcSource {
    double pump_center = 0.0;     // omega_p, rad/s
    double pump_std = 0.0;        // delta, rad/s
    double phasematch_std = 0.0;  // Delta, rad/s

    double delta_plus() const;
    double degenerate_center() const { return 0.5 * pump_center; }
    // Rejects non-positive widths. Returns a warning (empty if none) when the
    // pump is not narrow compared to the phase-matching width.
    std::string validate() const;
};

struct TabulatedSpectrum {
    std::vector<double> omega;    // rad/s, strictly increasing
    std::vector<double> density;  // 1/(rad/s), >= 0

    double evaluate(double w) const;  // linear interpolation, 0 outside
    double integral() const;
};

// G(w | center, std), unit integral.
double gaussian_pdf(double omega, const GaussianSpectrum& g);
double gaussian_pdf(double omega, double center, double std);

// Two-photon density 2 G(ws - wi | 0, Delta) G(ws + wi | wp, delta).
double joint_density(double omega_s, double omega_i, const SpdcSource& src);

// Single-photon spectrum: G(w | wp/2, Delta_plus/2).
GaussianSpectrum marginal(const SpdcSource& src);

// Rows must have strictly increasing omega and non-negative density.
TabulatedSpectrum load_tabulated(std::vector<std::pair<double, double>> rows);

struct GaussianSpectrumFit {
    GaussianSpectrum spectrum;
    double amplitude = 0.0;  // integral of the fitted curve
    double residual_norm = 0.0;
};

// Least-squares fit of amplitude * G(w | center, std) to the table.
// Optional square-root weights per row.
GaussianSpectrumFit fit_gaussian(const TabulatedSpectrum& spec,
                                 std::span<const double> sqrt_weights = {});

}  // namespace qoct
