#pragma once

#include "qoct/material.hpp"
#include "qoct/spectra.hpp"

#include <complex>
#include <string>
#include <variant>

namespace qoct {

using cplx = std::complex<double>;

// H = r e^{i w T}, T = n d / c.
struct SingleLayer {
    double r = 1.0;
    double T = 0.0;  // s

    double R() const { return r * r; }
    void validate() const;
};

enum class IndexModel {
    exact,       // full Sellmeier n(w)
    linearized,  // n(w0) + n'(w0)(w - w0), the first-order model behind the broadening formulas
};

// H = r e^{i (w T0 + passes w n(w) L / c)}: a slab of thickness L in front of
// a reflector r, plus an optional extra air delay T0.
struct DispersiveSlab {
    double thickness = 0.0;  // m
    SellmeierMaterial material;
    double r = 1.0;
    int passes = 2;
    IndexModel index_model = IndexModel::exact;
    double reference_omega = 0.0;  // expansion point for `linearized`; rad/s
    double extra_delay = 0.0;      // s

    void validate() const;
    double phase(double omega) const;
    // d phase / d w evaluated analytically at omega.
    double group_delay(double omega) const;
};

// Two interfaces separated by a gap. Positions are on the mirror-displacement
// axis, so x1 maps to the delay 2 x1 / c and the gap to tau_d = 2 d / c.
// H = e^{i w tau1} [r1 + t1^2 r2 e^{i w tau_d} sum_{k<K} (-r1 r2 e^{i w tau_d})^k]
// where -r1 is the internal reflection of interface 1 (Stokes relation).
struct GapSample {
    double r1 = 0.0;
    double r2 = 0.0;
    double t1 = 1.0;
    double gap = 0.0;  // m
    double x1 = 0.0;   // m
    int echo_count = 4;

    void validate() const;
    double tau1() const;
    double tau_gap() const;
};

using Sample = std::variant<SingleLayer, DispersiveSlab, GapSample>;

void validate(const Sample& s);
std::string sample_kind(const Sample& s);

// Throws std::domain_error for omega <= 0.
cplx respond(const Sample& s, double omega);
cplx respond(const SingleLayer& s, double omega);
cplx respond(const DispersiveSlab& s, double omega);
cplx respond(const GapSample& s, double omega);

struct DispersionReport {
    double kappa = 0.0;       // s^2
    double alpha0 = 1.0;
    double alpha1 = 1.0;
    double dn_domega = 0.0;   // s
    double index = 1.0;       // n at wp/2
    double path_length = 0.0; // l, m
    // Second-order phase of the full index model, (l/c)(2 n' + w n''), and the
    // M1 broadening it implies. The formulas above use only n'.
    double phi2_exact = 0.0;
    double alpha1_exact = 1.0;
};

DispersionReport broadening_factors(const SpdcSource& src, const SellmeierMaterial& material,
                                    double thickness, int passes = 2);

}  // namespace qoct
