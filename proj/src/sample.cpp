#include "qoct/sample.hpp"

#include "qoct/units.hpp"

#include <cmath>
#include <stdexcept>

namespace qoct {

void SingleLayer::validate() const {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("SingleLayer: r must be in [0, 1]");
    if (!std::isfinite(T)) throw std::invalid_argument("SingleLayer: non-finite T");
}

void DispersiveSlab::validate() const {
    if (!(thickness >= 0.0)) throw std::invalid_argument("DispersiveSlab: thickness must be >= 0");
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("DispersiveSlab: r must be in [0, 1]");
    if (passes < 1) throw std::invalid_argument("DispersiveSlab: passes must be >= 1");
    if (index_model == IndexModel::linearized && !(reference_omega > 0.0))
        throw std::invalid_argument("DispersiveSlab: linearized model needs reference_omega > 0");
    if (material.B.empty()) throw std::invalid_argument("DispersiveSlab: no material");
}

double DispersiveSlab::phase(double w) const {
    double n;
    if (index_model == IndexModel::linearized) {
        n = material.index(reference_omega) + material.dn_domega(reference_omega) * (w - reference_omega);
    } else {
        n = material.index_unchecked(w);
    }
    return w * extra_delay + passes * w * n * thickness / units::c;
}

double DispersiveSlab::group_delay(double w) const {
    double n, dn;
    if (index_model == IndexModel::linearized) {
        dn = material.dn_domega(reference_omega);
        n = material.index(reference_omega) + dn * (w - reference_omega);
    } else {
        n = material.index(w);
        dn = material.dn_domega(w);
    }
    return extra_delay + passes * (n + w * dn) * thickness / units::c;
}

void GapSample::validate() const {
    if (std::abs(r1) > 1.0 || std::abs(r2) > 1.0 || std::abs(t1) > 1.0)
        throw std::invalid_argument("GapSample: |r1|, |r2|, |t1| must be <= 1");
    if (r1 * r1 + t1 * t1 > 1.0 + 1e-12)
        throw std::invalid_argument("GapSample: r1^2 + t1^2 must be <= 1");
    if (!(gap >= 0.0)) throw std::invalid_argument("GapSample: gap must be >= 0");
    if (echo_count < 0) throw std::invalid_argument("GapSample: echo_count must be >= 0");
}

double GapSample::tau1() const { return units::mirror_to_delay(x1); }
double GapSample::tau_gap() const { return units::mirror_to_delay(gap); }

void validate(const Sample& s) {
    std::visit([](const auto& v) { v.validate(); }, s);
}

std::string sample_kind(const Sample& s) {
    struct V {
        std::string operator()(const SingleLayer&) const { return "single_layer"; }
        std::string operator()(const DispersiveSlab&) const { return "dispersive_slab"; }
        std::string operator()(const GapSample&) const { return "gap"; }
    };
    return std::visit(V{}, s);
}

static void check_omega(double w) {
    if (!(w > 0.0)) throw std::domain_error("respond: frequency must be > 0");
}

cplx respond(const SingleLayer& s, double w) {
    check_omega(w);
    return std::polar(s.r, w * s.T);
}

cplx respond(const DispersiveSlab& s, double w) {
    check_omega(w);
    return std::polar(s.r, s.phase(w));
}

cplx respond(const GapSample& s, double w) {
    check_omega(w);
    const cplx e = std::polar(1.0, w * s.tau_gap());
    const cplx q = -s.r1 * s.r2 * e;
    cplx term = s.t1 * s.t1 * s.r2 * e;
    cplx sum = 0.0;
    for (int k = 0; k < s.echo_count; ++k) {
        sum += term;
        term *= q;
    }
    return std::polar(1.0, w * s.tau1()) * (s.r1 + sum);
}

cplx respond(const Sample& s, double w) {
    return std::visit([w](const auto& v) { return respond(v, w); }, s);
}

DispersionReport broadening_factors(const SpdcSource& src, const SellmeierMaterial& m, double thickness,
                                    int passes) {
    if (!(thickness >= 0.0)) throw std::invalid_argument("broadening_factors: thickness must be >= 0");
    if (passes < 1) throw std::invalid_argument("broadening_factors: passes must be >= 1");
    const double w0 = src.degenerate_center();
    DispersionReport rep;
    rep.index = m.index(w0);
    rep.dn_domega = m.dn_domega(w0);
    rep.path_length = passes * thickness;
    rep.kappa = rep.path_length / units::c * rep.dn_domega;
    const double d = src.pump_std, D = src.phasematch_std;
    const double Dp2 = D * D + d * d;
    rep.alpha0 = std::sqrt(1.0 + d * d * D * D * rep.kappa * rep.kappa);
    rep.alpha1 = std::sqrt(1.0 + Dp2 * Dp2 * rep.kappa * rep.kappa / 4.0);
    rep.phi2_exact = rep.path_length / units::c * (2.0 * rep.dn_domega + w0 * m.d2n_domega2(w0));
    rep.alpha1_exact = std::sqrt(1.0 + Dp2 * Dp2 * rep.phi2_exact * rep.phi2_exact / 16.0);
    return rep;
}

}  // namespace qoct
