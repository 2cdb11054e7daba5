#include "qoct/interferometer.hpp"

#include "qoct/error.hpp"
#include "qoct/parallel.hpp"
#include "qoct/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qoct {

namespace {

constexpr int kMinNodes = 64;
// Aliasing margin of the trapezoid rule: the error of integrating
// G(x|0,s) e^{ikx} with step h is ~exp(-(2 pi/h - k)^2 s^2 / 2).
constexpr double kAliasMargin = 12.0;

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// Average of e^{-i w tau'} over a window of width b around tau.
double box_factor(double w, double b) { return b > 0.0 ? sinc(0.5 * w * b) : 1.0; }

AxisRule hermite_rule(int n) {
    // Golub-Welsch for the probabilists' weight exp(-x^2/2)/sqrt(2 pi).
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) throw NumericalError("Gauss-Hermite: eigen-decomposition failed");
    AxisRule r;
    for (int i = 0; i < n; ++i) {
        r.x.push_back(es.eigenvalues()(i));
        const double v = es.eigenvectors()(0, i);
        r.w.push_back(v * v);
    }
    return r;
}

// Span of group delays present in the sample response.
std::pair<double, double> delay_support(const Sample& s, const SpdcSource& src, double extent) {
    struct V {
        const SpdcSource& src;
        double extent;
        std::pair<double, double> operator()(const SingleLayer& l) const { return {l.T, l.T}; }
        std::pair<double, double> operator()(const GapSample& g) const {
            const double lo = g.tau1(), hi = g.tau1() + std::max(g.echo_count, 0) * g.tau_gap();
            return {std::min(lo, hi), std::max(lo, hi)};
        }
        std::pair<double, double> operator()(const DispersiveSlab& sl) const {
            const double w0 = src.degenerate_center();
            const double half = extent * src.delta_plus() / 2.0;
            double lo = 1e300, hi = -1e300;
            for (int k = 0; k <= 32; ++k) {
                const double w = w0 - half + 2.0 * half * k / 32.0;
                const double h = 1e-6 * w;
                const double gd = (sl.phase(w + h) - sl.phase(w - h)) / (2.0 * h);
                lo = std::min(lo, gd);
                hi = std::max(hi, gd);
            }
            return {lo, hi};
        }
    };
    return std::visit(V{src, extent}, s);
}

}  // namespace

void QuadratureGrid::validate() const {
    if (!(extent >= 6.0)) throw std::invalid_argument("QuadratureGrid: extent must be >= 6 standard deviations");
    if (nodes_u < 0 || nodes_v < 0 || nodes_outer < 0 || nodes_inner < 0)
        throw std::invalid_argument("QuadratureGrid: node counts must be >= 0");
    if (!(box_average >= 0.0)) throw std::invalid_argument("QuadratureGrid: box_average must be >= 0");
}

AxisRule gaussian_axis(double std, double bandwidth, const QuadratureGrid& g, int nodes) {
    if (!(std > 0.0)) throw std::invalid_argument("gaussian_axis: std must be > 0");
    if (g.rule == QuadratureRule::gauss_hermite) {
        AxisRule r = hermite_rule(nodes > 0 ? nodes : kMinNodes);
        for (double& x : r.x) x *= std;
        return r;
    }
    int n = nodes;
    if (n <= 0) {
        const double hmax = units::two_pi / (std::abs(bandwidth) + kAliasMargin / std);
        n = static_cast<int>(std::ceil(2.0 * g.extent * std / hmax)) + 1;
        n = std::max(n, kMinNodes);
    }
    if (n % 2 == 0) ++n;  // keep a node at the centre
    const double h = 2.0 * g.extent * std / (n - 1);
    AxisRule r;
    r.x.resize(static_cast<std::size_t>(n));
    r.w.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double x = -g.extent * std + h * k;
        r.x[static_cast<std::size_t>(k)] = x;
        r.w[static_cast<std::size_t>(k)] = h * gaussian_pdf(x, 0.0, std);
    }
    return r;
}

InterferogramTerms quadrature_terms(const SpdcSource& src, const Sample& sample, std::span<const double> tau,
                                    const QuadratureGrid& g) {
    g.validate();
    src.validate();
    validate(sample);
    if (tau.empty()) throw std::invalid_argument("quadrature_terms: empty delay grid");

    const double w0 = src.degenerate_center();
    const double wp = src.pump_center;
    const double D = src.phasematch_std, d = src.pump_std, Dp = src.delta_plus();
    const auto [tmin_it, tmax_it] = std::minmax_element(tau.begin(), tau.end());
    const auto [dlo, dhi] = delay_support(sample, src, g.extent);
    const double W = std::max({*tmax_it - dlo, dhi - *tmin_it, dhi - dlo, 0.0});
    // |H|^2 factors add echo beat frequencies up to the delay spread.
    const double Wq = W + (dhi - dlo);
    const double b = g.box_average;

    const AxisRule U = gaussian_axis(D, Wq, g, g.nodes_u);
    const AxisRule V = gaussian_axis(d, Wq, g, g.nodes_v);
    const AxisRule O = gaussian_axis(Dp / 2.0, Wq, g, g.nodes_outer);
    const double s_in = D * d / Dp;
    const AxisRule I = gaussian_axis(s_in, dhi - dlo, g, g.nodes_inner);
    const std::size_t nu = U.x.size(), nv = V.x.size(), no = O.x.size(), ni = I.x.size();

    auto H = [&](double w) { return respond(sample, w); };

    // Rotated frame: u = n1 - n2, v = n1 + n2, |F|^2 dn1 dn2 = G(u|0,D) G(v|0,d) du dv.
    Eigen::MatrixXcd H1(nu, nv), H2(nu, nv);
    for (std::size_t a = 0; a < nu; ++a)
        for (std::size_t c = 0; c < nv; ++c) {
            H1(a, c) = H(w0 + 0.5 * (U.x[a] + V.x[c]));
            H2(a, c) = H(w0 + 0.5 * (V.x[c] - U.x[a]));
        }

    double Mc = 0.0;
    std::vector<cplx> Q0(nu, 0.0), Q2(nv, 0.0);
    Eigen::MatrixXcd P(nu, nv);  // M1' integrand without the delay phase
    for (std::size_t a = 0; a < nu; ++a)
        for (std::size_t c = 0; c < nv; ++c) {
            const cplx h1 = H1(a, c), h2 = H2(a, c);
            const double n1 = std::norm(h1), n2 = std::norm(h2);
            const double wuv = U.w[a] * V.w[c];
            Mc += wuv * (n1 + 1.0) * (n2 + 1.0) / 4.0;
            Q0[a] += 0.5 * V.w[c] * h1 * std::conj(h2);
            Q2[c] += 0.5 * U.w[a] * h1 * h2;
            const double nu2 = 0.5 * (V.x[c] - U.x[a]);
            P(a, c) = wuv * h2 * (n1 + 1.0) * box_factor(w0 + nu2, b);
        }
    for (std::size_t a = 0; a < nu; ++a) Q0[a] *= U.w[a] * box_factor(U.x[a], b);
    for (std::size_t c = 0; c < nv; ++c) Q2[c] *= V.w[c] * box_factor(wp + V.x[c], b);

    // M1 by conditioning: n1 ~ G(0, Dp/2), n2 | n1 ~ G(-n1 (D^2 - d^2)/Dp^2, D d / Dp).
    std::vector<cplx> Q1(no);
    const double slope = -(D * D - d * d) / (Dp * Dp);
    for (std::size_t k = 0; k < no; ++k) {
        const double n1 = O.x[k];
        double inner = 0.0;
        for (std::size_t j = 0; j < ni; ++j) inner += I.w[j] * (std::norm(H(w0 + slope * n1 + I.x[j])) + 1.0);
        Q1[k] = O.w[k] * H(w0 + n1) * inner * box_factor(w0 + n1, b);
    }

    const std::size_t n = tau.size();
    InterferogramTerms t;
    t.tau.assign(tau.begin(), tau.end());
    t.omega0 = w0;
    t.box_average = b;
    t.Mc = Mc;
    t.M0.assign(n, 0.0);
    t.Z1.assign(n, 0.0);
    t.Z2.assign(n, 0.0);
    std::vector<cplx> Z1p(n);
    t.nodes_u = static_cast<int>(nu);
    t.nodes_v = static_cast<int>(nv);
    t.nodes_outer = static_cast<int>(no);
    t.nodes_inner = static_cast<int>(ni);

    parallel_for(
        n,
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double ti = tau[i];
                cplx m0 = 0.0, z1 = 0.0, z2 = 0.0;
                for (std::size_t a = 0; a < nu; ++a) m0 += std::polar(1.0, -U.x[a] * ti) * Q0[a];
                for (std::size_t c = 0; c < nv; ++c) z2 += std::polar(1.0, -V.x[c] * ti) * Q2[c];
                for (std::size_t k = 0; k < no; ++k) z1 += std::polar(1.0, -O.x[k] * ti) * Q1[k];
                t.M0[i] = m0.real();
                t.Z1[i] = z1;
                t.Z2[i] = z2;
            }
            // M1': sum_{u,v} e^{-i n2 tau} P with n2 = (v - u)/2, as (A P) .* B row sums.
            constexpr std::size_t kChunk = 256;
            for (std::size_t c0 = lo; c0 < hi; c0 += kChunk) {
                const std::size_t m = std::min(kChunk, hi - c0);
                Eigen::MatrixXcd A(m, nu), B(m, nv);
                for (std::size_t r = 0; r < m; ++r) {
                    const double ti = tau[c0 + r];
                    for (std::size_t a = 0; a < nu; ++a) A(r, a) = std::polar(1.0, 0.5 * U.x[a] * ti);
                    for (std::size_t c = 0; c < nv; ++c) B(r, c) = std::polar(1.0, -0.5 * V.x[c] * ti);
                }
                const Eigen::MatrixXcd AP = A * P;
                for (std::size_t r = 0; r < m; ++r) Z1p[c0 + r] = (AP.row(r).array() * B.row(r).array()).sum();
            }
        },
        g.threads);

    double worst = 0.0;
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx e = std::polar(1.0, -w0 * tau[i]);
        const double diff = std::abs(std::real(e * t.Z1[i]) - std::real(e * Z1p[i])) / Mc;
        if (diff > worst) {
            worst = diff;
            worst_i = i;
        }
        t.Z1[i] = 0.5 * (t.Z1[i] + Z1p[i]);
    }
    t.m1_mismatch = worst;
    if (!(worst <= g.m1_tolerance)) {
        std::ostringstream os;
        os << "quadrature_terms: M1 and M1' disagree by " << worst << " (relative to Mc) at tau = " << tau[worst_i]
           << " s; refine the grid or check the sample";
        throw NumericalError(os.str());
    }
    t.refresh_carriers();
    return t;
}

SinglePhotonTerms single_photon_terms(const Spectrum& spectrum, const Sample& sample, std::span<const double> tau,
                                      Port port, const QuadratureGrid& g) {
    g.validate();
    validate(sample);
    if (tau.empty()) throw std::invalid_argument("single_photon_terms: empty delay grid");
    const double b = g.box_average;

    // Frequencies and weights of the spectral density.
    std::vector<double> w, wt;
    double carrier = 0.0;
    if (const auto* gs = std::get_if<GaussianSpectrum>(&spectrum)) {
        gs->validate();
        if (!(gs->center > 0.0)) throw std::invalid_argument("single_photon_terms: spectrum center must be > 0");
        const auto [tmin_it, tmax_it] = std::minmax_element(tau.begin(), tau.end());
        SpdcSource dummy{2.0 * gs->center, gs->std * 1e-3, 2.0 * gs->std};
        const auto [dlo, dhi] = delay_support(sample, dummy, g.extent);
        const double W = std::max({*tmax_it - dlo, dhi - *tmin_it, dhi - dlo, 0.0});
        const AxisRule A = gaussian_axis(gs->std, W, g, g.nodes_outer);
        carrier = gs->center;
        for (std::size_t k = 0; k < A.x.size(); ++k) {
            w.push_back(gs->center + A.x[k]);
            wt.push_back(A.w[k]);
        }
        // Refinement check on a few delays: doubling the nodes must not move the result.
        if (g.rule == QuadratureRule::trapezoid) {
            QuadratureGrid g2 = g;
            g2.nodes_outer = static_cast<int>(2 * A.x.size());
            const AxisRule A2 = gaussian_axis(gs->std, W, g2, g2.nodes_outer);
            const std::size_t step = std::max<std::size_t>(1, tau.size() / 16);
            for (std::size_t i = 0; i < tau.size(); i += step) {
                cplx s1 = 0.0, s2 = 0.0;
                for (std::size_t k = 0; k < A.x.size(); ++k)
                    s1 += A.w[k] * std::polar(1.0, -(carrier + A.x[k]) * tau[i]) * respond(sample, carrier + A.x[k]);
                for (std::size_t k = 0; k < A2.x.size(); ++k)
                    s2 += A2.w[k] * std::polar(1.0, -(carrier + A2.x[k]) * tau[i]) * respond(sample, carrier + A2.x[k]);
                if (std::abs(s1 - s2) > 1e-9)
                    throw NumericalError("single_photon_terms: quadrature refinement failed to converge");
            }
        }
    } else {
        const auto& ts = std::get<TabulatedSpectrum>(spectrum);
        const double norm = ts.integral();
        if (!(norm > 0.0)) throw std::invalid_argument("single_photon_terms: tabulated spectrum has zero integral");
        if (!(ts.omega.front() > 0.0)) throw std::invalid_argument("single_photon_terms: tabulated frequencies must be > 0");
        double m1 = 0.0;
        for (std::size_t k = 0; k < ts.omega.size(); ++k) {
            const double dw = 0.5 * ((k + 1 < ts.omega.size() ? ts.omega[k + 1] : ts.omega[k]) -
                                     (k > 0 ? ts.omega[k - 1] : ts.omega[k]));
            w.push_back(ts.omega[k]);
            wt.push_back(ts.density[k] * dw / norm);
            m1 += wt.back() * ts.omega[k];
        }
        carrier = m1;
    }

    SinglePhotonTerms out;
    out.tau.assign(tau.begin(), tau.end());
    out.carrier = carrier;
    out.port = port;
    out.box_average = b;
    std::vector<cplx> Hw(w.size());
    double cst = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        Hw[k] = respond(sample, w[k]);
        cst += wt[k] * (1.0 + std::norm(Hw[k])) / 4.0;
        Hw[k] *= wt[k] * box_factor(w[k], b);
    }
    out.constant = cst;
    out.Z.assign(tau.size(), 0.0);
    // M = const -/+ (1/2) Re sum_k wt e^{-i w_k tau} H_k, written around the carrier.
    parallel_for(
        tau.size(),
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                cplx z = 0.0;
                for (std::size_t k = 0; k < w.size(); ++k) z += std::polar(1.0, -(w[k] - carrier) * tau[i]) * Hw[k];
                out.Z[i] = z;
            }
        },
        g.threads);
    return out;
}

Interferogram single_photon_interferogram(const Spectrum& spectrum, const Sample& sample, std::span<const double> tau,
                                          Port port, const QuadratureGrid& g) {
    const SinglePhotonTerms t = single_photon_terms(spectrum, sample, tau, port, g);
    Interferogram out;
    out.tau = t.tau;
    out.values = t.values();
    out.kind = Kind::single;
    out.meta["port"] = port == Port::a ? "a" : "b";
    out.box_average = t.box_average;
    return out;
}

}  // namespace qoct
