#include "qoct/reconstruct.hpp"

#include "qoct/dsp.hpp"
#include "qoct/error.hpp"
#include "qoct/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qoct {

void FeatureModel::validate() const {
    if (std::abs(r1) > 1.0 || std::abs(r2) > 1.0 || std::abs(t1) > 1.0)
        throw std::invalid_argument("FeatureModel: |r1|, |r2|, |t1| must be <= 1");
    if (!(A >= 0.0)) throw std::invalid_argument("FeatureModel: A must be >= 0");
}

double echo_coefficient(const FeatureModel& m, int k) {
    if (k < 1) throw std::invalid_argument("echo_coefficient: k >= 1");
    if (k == 1) return m.r1;
    return m.t1 * m.t1 * m.r2 * std::pow(-m.r1 * m.r2, k - 2);
}

std::array<double, 5> predict_amplitudes(const FeatureModel& m) {
    m.validate();
    double h[6];
    for (int k = 1; k <= 5; ++k) h[k] = echo_coefficient(m, k);
    auto V = [&](int k) { return 0.5 * m.A * h[k] * h[k]; };
    auto Vkl = [&](int k, int l) { return m.A * h[k] * h[l] * std::cos((k - l) * m.phi0); };
    return {V(1), Vkl(1, 2), V(2) + Vkl(1, 3), Vkl(2, 3) + Vkl(1, 4), V(3) + Vkl(2, 4) + Vkl(1, 5)};
}

double ReconFit::evaluate(double x) const {
    double v = C + k * x;
    const auto c = centers();
    for (int j = 0; j < 5; ++j) {
        const double z = (x - c[j]) / sigma;
        v -= A[j] * std::exp(-0.5 * z * z);
    }
    return v;
}

std::array<double, 5> ReconFit::centers() const {
    std::array<double, 5> c{};
    for (int j = 0; j < 5; ++j) c[j] = x1 + j * d / 2.0;
    return c;
}

namespace {

double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

double robust_noise(std::span<const double> y) {
    std::vector<double> d;
    for (std::size_t i = 1; i < y.size(); ++i) d.push_back(y[i] - y[i - 1]);
    const double md = median(d);
    for (double& v : d) v = std::abs(v - md);
    return 1.4826 * median(d) / std::sqrt(2.0);
}

// Linear least squares for (C, A1..A5, k) at fixed (sigma, x1, d). Returns SSR.
double project(std::span<const double> x, std::span<const double> y, double sigma, double x1, double d,
               int nfeat, ReconFit* out) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const int cols = nfeat + 2;
    Eigen::MatrixXd M(n, cols);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        M(i, 0) = 1.0;
        for (int j = 0; j < nfeat; ++j) {
            const double z = (xi - x1 - j * d / 2.0) / sigma;
            M(i, 1 + j) = -std::exp(-0.5 * z * z);
        }
        M(i, cols - 1) = xi;
        b(i) = y[static_cast<std::size_t>(i)];
    }
    // Normal equations: the columns are well separated Gaussians, a constant and a ramp.
    const Eigen::MatrixXd MtM = M.transpose() * M;
    const Eigen::VectorXd sol = MtM.ldlt().solve(M.transpose() * b);
    const double ssr = (M * sol - b).squaredNorm();
    if (out) {
        out->C = sol(0);
        out->A.fill(0.0);
        for (int j = 0; j < nfeat; ++j) out->A[static_cast<std::size_t>(j)] = sol(1 + j);
        out->k = sol(cols - 1);
        out->sigma = sigma;
        out->x1 = x1;
        out->d = d;
    }
    return ssr;
}

}  // namespace

ReconFit initialize_reconstruction(std::span<const double> x, std::span<const double> y, const ReconOptions& opt) {
    if (x.size() != y.size()) throw std::invalid_argument("reconstruction: size mismatch");
    if (x.size() < 20) throw std::invalid_argument("reconstruction: need at least 20 samples");
    const double h = uniform_step(x);
    const double base = median(std::vector<double>(y.begin(), y.end()));
    const double noise = robust_noise(y);
    const std::size_t n = y.size();
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = std::abs(base - y[i]);
    const double thr = opt.threshold_sigmas * std::max(noise, 1e-12 * (std::abs(base) + 1.0));

    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] <= thr) continue;
        bool is_max = true;
        for (std::size_t j = i >= 3 ? i - 3 : 0; j <= std::min(n - 1, i + 3); ++j)
            if (s[j] > s[i]) is_max = false;
        if (is_max) peaks.push_back(i);
    }
    if (peaks.empty()) throw NumericalError("reconstruction: no features above the noise threshold");

    // Width from the strongest feature.
    const std::size_t top = *std::max_element(peaks.begin(), peaks.end(), [&](auto a, auto b) { return s[a] < s[b]; });
    std::size_t a = top, b = top;
    while (a > 0 && s[a] > 0.5 * s[top]) --a;
    while (b + 1 < n && s[b] > 0.5 * s[top]) ++b;
    const double sigma0 = std::max((x[b] - x[a]) / units::fwhm_per_sigma, h);

    // Keep only the local maxima over one feature width.
    {
        const auto w = static_cast<std::size_t>(std::ceil(sigma0 / h));
        std::vector<std::size_t> kept;
        for (auto p : peaks) {
            bool is_max = true;
            for (std::size_t j = p >= w ? p - w : 0; j <= std::min(n - 1, p + w); ++j)
                if (s[j] > s[p]) is_max = false;
            if (is_max) kept.push_back(p);
        }
        peaks = std::move(kept);
    }
    const double first = x[peaks.front()];
    bool single = true;
    for (auto p : peaks)
        if (x[p] - first > 4.0 * sigma0) single = false;
    ReconFit best;
    if (single) {
        project(x, y, sigma0, x[top], 0.0, 1, &best);
        return best;
    }
    // Every candidate may be the first interface: ripple or noise can clear
    // the threshold ahead of it, and the alignment explaining the most
    // features wins on residual.
    double best_ssr = std::numeric_limits<double>::infinity();
    const double dmin = std::max(4.0 * sigma0, 2.0 * h);
    const double dstep = sigma0 / 4.0;
    for (std::size_t pk : peaks) {
        for (int ix = -4; ix <= 4; ++ix) {
            const double x1 = x[pk] + ix * sigma0 / 4.0;
            const double dmax = (x.back() - x1) / 2.0;
            for (double d = dmin; d <= dmax; d += dstep) {
                ReconFit cand;
                const double ssr = project(x, y, sigma0, x1, d, 5, &cand);
                if (ssr < best_ssr) {
                    best_ssr = ssr;
                    best = cand;
                }
            }
        }
    }
    if (!std::isfinite(best_ssr)) throw NumericalError("reconstruction: trace too short for a second feature");
    return best;
}

ReconFitOutcome fit_reconstruction(std::span<const double> x, std::span<const double> y, const ReconFit& init,
                                   const ReconOptions& opt, std::span<const double> sqrt_weights) {
    if (x.size() != y.size()) throw std::invalid_argument("reconstruction: size mismatch");
    if (!(init.sigma > 0.0)) throw std::invalid_argument("reconstruction: initial sigma must be > 0");
    const double xc = 0.5 * (x.front() + x.back());
    const double xspan = std::max(x.back() - x.front(), 1e-12);
    double ys = 0.0;
    const double base = median(std::vector<double>(y.begin(), y.end()));
    for (double v : y) ys = std::max(ys, std::abs(v - base));
    if (!(ys > 0.0)) throw NumericalError("reconstruction: flat trace");

    std::vector<double> xs(x.begin(), x.end()), yn(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yn[i] = y[i] / ys;
    const bool single = init.d == 0.0;

    // Scaled parameters: C', A'_1..5, sigma, x1 - xc, d, k'.
    std::vector<double> p0 = {(init.C + init.k * xc) / ys};
    for (double a : init.A) p0.push_back(a / ys);
    p0.insert(p0.end(), {init.sigma, init.x1 - xc, init.d, init.k * xspan / ys});
    FitProblem prob = curve_problem(
        [xc, xspan](double t, std::span<const double> p) {
            double v = p[0] + p[9] * (t - xc) / xspan;
            for (int j = 0; j < 5; ++j) {
                const double z = (t - xc - p[7] - j * p[8] / 2.0) / p[6];
                v -= p[1 + j] * std::exp(-0.5 * z * z);
            }
            return v;
        },
        xs, yn, p0, {"C", "A1", "A2", "A3", "A4", "A5", "sigma", "x1", "d", "k"}, sqrt_weights);
    prob.fixed.assign(10, false);
    for (int j = 0; j < 5; ++j) prob.fixed[static_cast<std::size_t>(1 + j)] = opt.fixed_amplitudes[static_cast<std::size_t>(j)];
    if (single) {
        for (int j = 1; j < 5; ++j) prob.fixed[static_cast<std::size_t>(1 + j)] = true;
        prob.fixed[8] = true;
    }
    prob.bounds = Bounds::unbounded(10);
    prob.bounds.lower[6] = 1e-3;
    prob.bounds.lower[8] = 0.0;
    LeastSquaresOptions lso;
    lso.max_iterations = 500;
    FitResult fr = damped_least_squares(prob, lso);
    if (!fr.converged) throw NumericalError("fit_reconstruction: " + fr.message);

    const auto& p = fr.values;
    ReconFitOutcome out;
    ReconFit& f = out.fit;
    f.k = p[9] * ys / xspan;
    f.C = p[0] * ys - f.k * xc;
    for (int j = 0; j < 5; ++j) f.A[static_cast<std::size_t>(j)] = p[static_cast<std::size_t>(1 + j)] * ys;
    f.sigma = p[6];
    f.x1 = p[7] + xc;
    f.d = p[8];
    if (!single && !prob.fixed[8] && f.d < 4.0 * f.sigma)
        throw NumericalError("fit_reconstruction: gap collapsed below 4 sigma (unresolvable)");

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(10, 10);
    T(0, 0) = ys;
    T(0, 9) = -ys * xc / xspan;
    for (int j = 1; j <= 5; ++j) T(j, j) = ys;
    T(6, 6) = T(7, 7) = T(8, 8) = 1.0;
    T(9, 9) = ys / xspan;
    fr.covariance = T * fr.covariance * T.transpose();
    fr.values = {f.C, f.A[0], f.A[1], f.A[2], f.A[3], f.A[4], f.sigma, f.x1, f.d, f.k};
    for (Eigen::Index j = 0; j < 10; ++j)
        fr.errors[static_cast<std::size_t>(j)] = std::sqrt(std::max(fr.covariance(j, j), 0.0));
    fr.residual_norm *= ys;
    out.result = std::move(fr);
    return out;
}

PhysicalApprox approximate_physical(const std::array<double, 5>& amps, const PhysicalOptions& opt) {
    PhysicalApprox out;
    double scale = 0.0;
    for (double a : amps) {
        if (!std::isfinite(a)) throw std::invalid_argument("approximate_physical: non-finite amplitude");
        scale = std::max(scale, std::abs(a));
    }
    if (scale == 0.0) {
        out.degenerate = true;
        out.model.t1 = 1.0;
        return out;
    }
    if (!(amps[0] > 0.0)) throw NumericalError("approximate_physical: first feature must be a dip (A1 > 0)");

    const bool free_t1 = opt.free_t1;
    auto model_of = [free_t1](std::span<const double> p) {
        FeatureModel m;
        m.A = p[0];
        m.r1 = p[1];
        m.r2 = p[2];
        m.phi0 = p[3];
        m.t1 = free_t1 ? p[4] : std::sqrt(std::max(0.0, 1.0 - p[1] * p[1]));
        return m;
    };
    FitProblem prob;
    prob.residual_count = free_t1 ? 6 : 5;
    prob.residuals = [&](std::span<const double> p, std::span<double> r) {
        FeatureModel m = model_of(p);
        double h[6];
        for (int k = 1; k <= 5; ++k) h[k] = echo_coefficient(m, k);
        auto V = [&](int k) { return 0.5 * m.A * h[k] * h[k]; };
        auto Vkl = [&](int k, int l) { return m.A * h[k] * h[l] * std::cos((k - l) * m.phi0); };
        const double pred[5] = {V(1), Vkl(1, 2), V(2) + Vkl(1, 3), Vkl(2, 3) + Vkl(1, 4),
                                V(3) + Vkl(2, 4) + Vkl(1, 5)};
        for (int j = 0; j < 5; ++j) r[static_cast<std::size_t>(j)] = (pred[j] - amps[static_cast<std::size_t>(j)]) / scale;
        if (free_t1) r[5] = 10.0 * std::max(0.0, p[1] * p[1] + p[4] * p[4] - 1.0);
    };
    const std::size_t np = free_t1 ? 5 : 4;
    prob.names = {"A", "r1", "r2", "phi0"};
    if (free_t1) prob.names.push_back("t1");
    prob.bounds = Bounds::unbounded(np);
    prob.bounds.lower[0] = 0.0;
    prob.bounds.lower[1] = 0.0;
    prob.bounds.upper[1] = 1.0;
    prob.bounds.lower[2] = -1.0;
    prob.bounds.upper[2] = 1.0;
    if (free_t1) {
        prob.bounds.lower[4] = 0.0;
        prob.bounds.upper[4] = 1.0;
    }
    LeastSquaresOptions lso;
    lso.max_iterations = 400;
    FitResult best;
    double best_norm = std::numeric_limits<double>::infinity();
    for (double r1 : {0.2, 0.4, 0.6, 0.8})
        for (double r2 : {0.2, 0.5, 0.8})
            for (int ip = 0; ip < opt.phase_starts; ++ip) {
                const double phi = units::two_pi * ip / opt.phase_starts;
                prob.initial = {2.0 * amps[0] / (r1 * r1), r1, r2, phi};
                if (free_t1) prob.initial.push_back(std::sqrt(1.0 - r1 * r1));
                FitResult fr;
                try {
                    fr = damped_least_squares(prob, lso);
                } catch (const NumericalError&) {
                    continue;
                }
                if (fr.residual_norm < best_norm - 1e-15) {
                    best_norm = fr.residual_norm;
                    best = std::move(fr);
                }
            }
    if (!std::isfinite(best_norm)) throw NumericalError("approximate_physical: no start converged");

    FeatureModel m = model_of(best.values);
    // Canonical gauge.
    if (m.r2 < 0.0) {
        m.r2 = -m.r2;
        m.phi0 += units::pi;
    }
    m.phi0 = std::remainder(m.phi0, units::two_pi);
    m.phi0 = std::abs(m.phi0);
    out.model = m;
    out.predicted = predict_amplitudes(m);
    double rs = 0.0;
    for (int j = 0; j < 5; ++j) {
        out.residual[static_cast<std::size_t>(j)] = out.predicted[static_cast<std::size_t>(j)] - amps[static_cast<std::size_t>(j)];
        rs += out.residual[static_cast<std::size_t>(j)] * out.residual[static_cast<std::size_t>(j)];
    }
    out.residual_norm = std::sqrt(rs);
    best.values[0] = m.A;
    best.values[1] = m.r1;
    best.values[2] = m.r2;
    best.values[3] = m.phi0;
    best.residual_norm = out.residual_norm;
    out.fit = std::move(best);
    return out;
}

GapEstimate extract_gap(const ReconFit& recon, const FitResult& fit) {
    if (!fit.converged) throw NumericalError("extract_gap: fit did not converge");
    const std::size_t i = fit.index("d");
    return {recon.d, fit.errors[i]};
}

ReconstructionResult reconstruct(std::span<const double> x, std::span<const double> y, const ReconOptions& opt,
                                 std::span<const double> sqrt_weights) {
    ReconstructionResult res;
    res.initial = initialize_reconstruction(x, y, opt);
    res.free_fit = fit_reconstruction(x, y, res.initial, opt, sqrt_weights);
    if (res.initial.d == 0.0) {
        res.gap_identifiable = false;
        res.message = "single feature: gap not identifiable";
        res.physical.degenerate = true;
        return res;
    }
    res.physical = approximate_physical(res.free_fit.fit.A);
    ReconFit seed = res.free_fit.fit;
    seed.A = res.physical.predicted;
    ReconOptions frozen = opt;
    frozen.fixed_amplitudes.fill(true);
    try {
        res.refit = fit_reconstruction(x, y, seed, frozen, sqrt_weights);
        res.gap = extract_gap(res.refit->fit, res.refit->result);
    } catch (const NumericalError& e) {
        res.message = std::string("refit with frozen amplitudes failed (") + e.what() + "); gap from the free fit";
        res.gap = extract_gap(res.free_fit.fit, res.free_fit.result);
    }
    return res;
}

}  // namespace qoct
