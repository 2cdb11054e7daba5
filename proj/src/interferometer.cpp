#include "qoct/interferometer.hpp"

#include "qoct/error.hpp"
#include "qoct/units.hpp"

#include <cmath>
#include <stdexcept>

namespace qoct {

std::string to_string(Kind k) {
    switch (k) {
        case Kind::single: return "single";
        case Kind::autocorrelation: return "auto";
        case Kind::crosscorrelation: return "cross";
    }
    return "?";
}

std::string to_string(Scheme s) { return s == Scheme::autocorrelation ? "auto" : "cross"; }

Kind parse_kind(const std::string& s) {
    if (s == "single") return Kind::single;
    if (s == "auto") return Kind::autocorrelation;
    if (s == "cross") return Kind::crosscorrelation;
    throw ConfigError("unknown interferogram kind '" + s + "' (single|auto|cross)");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "auto") return Scheme::autocorrelation;
    if (s == "cross") return Scheme::crosscorrelation;
    throw ConfigError("unknown scheme '" + s + "' (auto|cross)");
}

Kind kind_of(Scheme s) { return s == Scheme::autocorrelation ? Kind::autocorrelation : Kind::crosscorrelation; }

void InterferogramTerms::refresh_carriers() {
    M1.resize(tau.size());
    M2.resize(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        M1[i] = std::real(std::polar(1.0, -omega0 * tau[i]) * Z1[i]);
        M2[i] = std::real(std::polar(1.0, -2.0 * omega0 * tau[i]) * Z2[i]);
    }
}

std::vector<double> SinglePhotonTerms::values() const {
    const double sgn = port == Port::b ? -0.5 : 0.5;
    std::vector<double> v(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i)
        v[i] = constant + sgn * std::real(std::polar(1.0, -carrier * tau[i]) * Z[i]);
    return v;
}

std::pair<cplx, cplx> alpha_beta(cplx H, double omega, double tau) {
    const cplx e = std::polar(1.0, omega * tau);
    return {0.5 * (e + H), cplx(0.0, 0.5) * (e - H)};
}

InterferogramTerms closed_form_terms(const SpdcSource& src, const SingleLayer& layer, std::span<const double> tau) {
    layer.validate();
    if (!(src.phasematch_std > 0.0) || !(src.pump_std >= 0.0) || !(src.pump_center > 0.0))
        throw std::invalid_argument("closed_form_terms: need Delta > 0, delta >= 0, wp > 0");
    const double R = layer.R(), r = layer.r;
    const double D = src.phasematch_std, d = src.pump_std, Dp = src.delta_plus();
    InterferogramTerms t;
    t.tau.assign(tau.begin(), tau.end());
    t.omega0 = src.degenerate_center();
    t.Mc = (1.0 + R) * (1.0 + R) / 4.0;
    const std::size_t n = tau.size();
    t.M0.resize(n);
    t.Z1.resize(n);
    t.Z2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = layer.T - tau[i];
        t.M0[i] = 0.5 * R * std::exp(-x * x * D * D / 2.0);
        t.Z1[i] = std::polar(r * (1.0 + R) * std::exp(-x * x * Dp * Dp / 8.0), t.omega0 * layer.T);
        t.Z2[i] = std::polar(0.5 * R * std::exp(-x * x * d * d / 2.0), src.pump_center * layer.T);
    }
    t.refresh_carriers();
    return t;
}

Composition composition(Scheme scheme) {
    if (scheme == Scheme::autocorrelation) return {0.25, 0.25, -0.25, 0.25};
    return {0.5, -0.5, 0.0, -0.5};
}

Interferogram compose(const InterferogramTerms& t, Scheme scheme) {
    const Composition k = composition(scheme);
    Interferogram out;
    out.tau = t.tau;
    out.kind = kind_of(scheme);
    out.box_average = t.box_average;
    out.values.resize(t.tau.size());
    for (std::size_t i = 0; i < t.tau.size(); ++i)
        out.values[i] = k.c * t.Mc + k.m0 * t.M0[i] + k.m1 * t.M1[i] + k.m2 * t.M2[i];
    return out;
}

double FourierEnvelope::operator()(double omega) const {
    if (std == 0.0) return omega == center ? amplitude : 0.0;
    return amplitude * gaussian_pdf(omega, center, std);
}

FourierMagnitudes fourier_magnitudes(const SpdcSource& src, const SingleLayer& layer) {
    layer.validate();
    const double R = layer.R(), r = layer.r, sp = std::sqrt(units::pi);
    FourierMagnitudes f;
    f.m0 = {0.0, src.phasematch_std, sp * R / 2.0};
    f.m1 = {src.pump_center / 2.0, src.delta_plus() / 2.0, sp * r * (1.0 + R) / 2.0};
    f.m2 = {src.pump_center, src.pump_std, sp * R / 4.0};
    f.separated = src.phasematch_std < src.pump_center / 3.0;
    return f;
}

}  // namespace qoct
