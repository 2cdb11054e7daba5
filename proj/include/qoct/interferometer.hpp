#pragma once

#include "qoct/sample.hpp"
#include "qoct/spectra.hpp"

#include <complex>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qoct {

enum class Kind { single, autocorrelation, crosscorrelation };
enum class Scheme { autocorrelation, crosscorrelation };
enum class Port { a, b };

std::string to_string(Kind k);
std::string to_string(Scheme s);
Kind parse_kind(const std::string& s);      // "single" | "auto" | "cross"
Scheme parse_scheme(const std::string& s);  // "auto" | "cross"
Kind kind_of(Scheme s);

struct Interferogram {
    std::vector<double> tau;     // s, strictly increasing
    std::vector<double> values;  // probability per pair, or counts/s after acquisition
    Kind kind = Kind::single;
    double box_average = 0.0;  // s, delay window each value is averaged over
    std::map<std::string, std::string> meta;
};

// M1 = Re[e^{-i w0 tau} Z1], M2 = Re[e^{-2 i w0 tau} Z2] with w0 = wp/2. The
// complex envelopes let the acquisition stage rotate carrier phases without
// touching M0 or Mc.
struct InterferogramTerms {
    std::vector<double> tau;
    double Mc = 0.0;
    std::vector<double> M0, M1, M2;
    std::vector<std::complex<double>> Z1, Z2;
    double omega0 = 0.0;  // wp/2
    double box_average = 0.0;  // s, delay window the values are averaged over
    // Grid actually used (zero for closed form) and the M1/M1' mismatch
    // relative to Mc.
    int nodes_u = 0, nodes_v = 0, nodes_outer = 0, nodes_inner = 0;
    double m1_mismatch = 0.0;

    void refresh_carriers();  // recompute M1, M2 from Z1, Z2
};

// M^(a|b)(tau) = constant -/+ (1/2) Re[e^{-i carrier tau} Z]; port b carries the minus sign.
struct SinglePhotonTerms {
    std::vector<double> tau;
    double constant = 0.0;
    double carrier = 0.0;
    std::vector<std::complex<double>> Z;
    Port port = Port::b;
    double box_average = 0.0;

    std::vector<double> values() const;
};

enum class QuadratureRule { trapezoid, gauss_hermite };

struct QuadratureGrid {
    QuadratureRule rule = QuadratureRule::trapezoid;
    double extent = 8.0;  // half-width of every axis in units of its Gaussian std
    // 0 selects the node count automatically from the delay range.
    int nodes_u = 0;
    int nodes_v = 0;
    int nodes_outer = 0;
    int nodes_inner = 0;
    // Width (s) of a delay window each point is averaged over; 0 for point values.
    double box_average = 0.0;
    double m1_tolerance = 1e-8;  // |M1 - M1'| / Mc
    int threads = 0;

    void validate() const;
};

// Nodes and weights of a one-dimensional rule for the weight G(x | 0, std).
struct AxisRule {
    std::vector<double> x;
    std::vector<double> w;
};
// `bandwidth` is the largest conjugate-variable (delay) frequency the
// integrand carries; used by the automatic trapezoid sizing.
AxisRule gaussian_axis(double std, double bandwidth, const QuadratureGrid& g, int nodes_override);

std::pair<std::complex<double>, std::complex<double>> alpha_beta(std::complex<double> H, double omega,
                                                                 double tau);

InterferogramTerms closed_form_terms(const SpdcSource& src, const SingleLayer& layer,
                                     std::span<const double> tau);

InterferogramTerms quadrature_terms(const SpdcSource& src, const Sample& sample,
                                    std::span<const double> tau, const QuadratureGrid& grid = {});

using Spectrum = std::variant<GaussianSpectrum, TabulatedSpectrum>;

SinglePhotonTerms single_photon_terms(const Spectrum& spectrum, const Sample& sample,
                                      std::span<const double> tau, Port port = Port::b,
                                      const QuadratureGrid& grid = {});
Interferogram single_photon_interferogram(const Spectrum& spectrum, const Sample& sample,
                                          std::span<const double> tau, Port port = Port::b,
                                          const QuadratureGrid& grid = {});

// auto: (Mc + M0 - M1 + M2)/4 ; cross: (Mc - M0 - M2)/2.
Interferogram compose(const InterferogramTerms& terms, Scheme scheme);
// Coefficients (c, m0, m1, m2) of the composition.
struct Composition {
    double c, m0, m1, m2;
};
Composition composition(Scheme scheme);

// |M~_j(w)| = amplitude * G(w | center, std) in the convention of the closed
// form; a unitary DFT of the same term is larger by sqrt(2).
struct FourierEnvelope {
    double center = 0.0;
    double std = 0.0;
    double amplitude = 0.0;
    double operator()(double omega) const;
};
struct FourierMagnitudes {
    FourierEnvelope m0, m1, m2;
    bool separated = false;  // Delta < wp / 3
};
FourierMagnitudes fourier_magnitudes(const SpdcSource& src, const SingleLayer& layer);

}  // namespace qoct
