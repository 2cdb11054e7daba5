#include "qoct/dsp.hpp"

#include "qoct/error.hpp"
#include "qoct/fft.hpp"
#include "qoct/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qoct {

namespace {

constexpr double kSincHalf = 1.8954942670339809;  // sin(z)/z = 1/2

double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

double sinc(double z) { return std::abs(z) < 1e-8 ? 1.0 - z * z / 6.0 : std::sin(z) / z; }

}  // namespace

double uniform_step(std::span<const double> x) {
    if (x.size() < 2) throw std::invalid_argument("need at least two samples");
    const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    if (!(h > 0.0)) throw std::invalid_argument("grid must be increasing");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs((x[i] - x[i - 1]) - h) > 1e-6 * h) throw std::invalid_argument("grid is not uniform");
    return h;
}

SpectrumTrace dft_magnitude(std::span<const double> tau, std::span<const double> values, double omega_p) {
    if (tau.size() != values.size()) throw std::invalid_argument("dft_magnitude: size mismatch");
    if (!(omega_p > 0.0)) throw std::invalid_argument("dft_magnitude: omega_p must be > 0");
    const double h = uniform_step(tau);
    const auto X = rfft_unitary(values);
    const double n = static_cast<double>(values.size());
    SpectrumTrace s;
    s.omega_p = omega_p;
    for (std::size_t k = 0; k < X.size(); ++k) {
        s.omega.push_back(units::two_pi * static_cast<double>(k) / (n * h) / omega_p);
        s.magnitude.push_back(std::abs(X[k]));
    }
    return s;
}

SpectrumTrace mean_dft_magnitude(std::span<const double> tau, const std::vector<std::vector<double>>& runs,
                                 double omega_p) {
    if (runs.empty()) throw std::invalid_argument("mean_dft_magnitude: no runs");
    SpectrumTrace acc;
    for (const auto& r : runs) {
        const auto s = dft_magnitude(tau, r, omega_p);
        if (acc.omega.empty()) {
            acc = s;
        } else {
            for (std::size_t k = 0; k < s.magnitude.size(); ++k) acc.magnitude[k] += s.magnitude[k];
        }
    }
    for (double& m : acc.magnitude) m /= static_cast<double>(runs.size());
    return acc;
}

double signal_energy(std::span<const double> values) {
    double e = 0.0;
    for (double v : values) e += v * v;
    return e;
}

double spectral_energy(std::span<const double> values) {
    const auto X = rfft_unitary(values);
    const std::size_t n = values.size();
    double e = std::norm(X[0]);
    for (std::size_t k = 1; k < X.size(); ++k) e += (2 * k == n ? 1.0 : 2.0) * std::norm(X[k]);
    return e;
}

std::vector<double> lowpass_extract(std::span<const double> tau, std::span<const double> values, double omega_p,
                                    double cutoff) {
    if (tau.size() != values.size()) throw std::invalid_argument("lowpass_extract: size mismatch");
    const double h = uniform_step(tau);
    const double nyquist = units::pi / h / omega_p;
    if (!(cutoff > 0.0) || !(cutoff < nyquist))
        throw std::invalid_argument("lowpass_extract: cutoff must lie in (0, Nyquist = " + std::to_string(nyquist) +
                                    " omega_p)");
    auto X = rfft_unitary(values);
    const double n = static_cast<double>(values.size());
    for (std::size_t k = 0; k < X.size(); ++k)
        if (units::two_pi * static_cast<double>(k) / (n * h) > cutoff * omega_p) X[k] = 0.0;
    return irfft_unitary(X, values.size());
}

std::vector<double> analytic_envelope(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 8) throw std::invalid_argument("analytic_envelope: need at least 8 samples");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    std::vector<double> v(values.begin(), values.end());
    for (double& x : v) x -= mean;
    const auto X = rfft_unitary(v);
    std::size_t kpk = 1;
    for (std::size_t k = 1; k < X.size(); ++k)
        if (std::abs(X[k]) > std::abs(X[kpk])) kpk = k;
    if (kpk < 4) throw NumericalError("analytic_envelope: trace has no carrier to demodulate");
    std::vector<std::complex<double>> Y(n, 0.0);
    for (std::size_t k = 1; k < X.size(); ++k) Y[k] = (2 * k == n ? 1.0 : 2.0) * X[k];
    const auto y = fft_unitary(Y, true);
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(y[i]) / std::sqrt(static_cast<double>(n));
    return env;
}

FeatureFit fit_gaussian_feature(std::span<const double> x, std::span<const double> y,
                                std::span<const double> sqrt_weights) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_gaussian_feature: size mismatch");
    if (x.size() < 5) throw std::invalid_argument("fit_gaussian_feature: need at least 5 points");
    std::vector<double> yv(y.begin(), y.end());
    const double m = median(yv);
    const auto [mn_it, mx_it] = std::minmax_element(y.begin(), y.end());
    if (!(*mx_it > *mn_it)) throw NumericalError("fit_gaussian_feature: flat trace");
    const int sign = (m - *mn_it) > (*mx_it - m) ? -1 : 1;
    const auto ext = sign < 0 ? mn_it : mx_it;
    const auto ie = static_cast<std::size_t>(ext - y.begin());
    const double amp0 = std::abs(*ext - m);
    // Half-level crossings around the extremum.
    const double half = m + 0.5 * (*ext - m);
    std::size_t a = ie, b = ie;
    while (a > 0 && (sign < 0 ? y[a] < half : y[a] > half)) --a;
    while (b + 1 < y.size() && (sign < 0 ? y[b] < half : y[b] > half)) ++b;
    const double step = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    const double s0 = std::max((x[b] - x[a]) / units::fwhm_per_sigma, std::abs(step));
    const double c0 = x[ie];

    std::vector<double> xs(x.size()), ys(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = (x[i] - c0) / s0;
        ys[i] = (y[i] - m) / amp0;
    }
    auto prob = curve_problem(
        [sign](double t, std::span<const double> p) {
            const double z = (t - p[0]) / p[1];
            return p[3] + sign * p[2] * std::exp(-0.5 * z * z);
        },
        xs, ys, {0.0, 1.0, 1.0, 0.0}, {"center", "sigma", "amplitude", "offset"}, sqrt_weights);
    prob.bounds = Bounds::unbounded(4);
    prob.bounds.lower[1] = 1e-6;
    LeastSquaresOptions opt;
    opt.max_iterations = 500;
    FitResult fr = damped_least_squares(prob, opt);
    if (!fr.converged) throw NumericalError("fit_gaussian_feature: " + fr.message);

    FeatureFit f;
    f.sign = sign;
    f.center = c0 + s0 * fr.values[0];
    f.sigma = s0 * fr.values[1];
    f.amplitude = amp0 * fr.values[2];
    f.offset = m + amp0 * fr.values[3];
    if (f.amplitude < 0.0) {
        f.amplitude = -f.amplitude;
        f.sign = -f.sign;
    }
    f.center_error = s0 * fr.errors[0];
    f.sigma_error = s0 * fr.errors[1];
    f.amplitude_error = amp0 * fr.errors[2];
    f.offset_error = amp0 * fr.errors[3];
    f.fwhm = units::fwhm_per_sigma * f.sigma;
    // Report the fit in data units.
    fr.values = {f.center, f.sigma, f.amplitude, f.offset};
    fr.errors = {f.center_error, f.sigma_error, f.amplitude_error, f.offset_error};
    const Eigen::Vector4d sc(s0, s0, amp0, amp0);
    fr.covariance = sc.asDiagonal() * fr.covariance * sc.asDiagonal();
    fr.residual_norm *= amp0;
    f.fit = std::move(fr);
    return f;
}

FeatureFit fit_spectral_peak(const SpectrumTrace& spec, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("fit_spectral_peak: empty window");
    std::vector<double> x, y;
    for (std::size_t k = 0; k < spec.omega.size(); ++k)
        if (spec.omega[k] >= lo && spec.omega[k] <= hi) {
            x.push_back(spec.omega[k]);
            y.push_back(spec.magnitude[k]);
        }
    if (x.size() < 5) throw std::invalid_argument("fit_spectral_peak: fewer than 5 bins in the window");
    // Moments above the floor: robust to single noisy bins, unlike the
    // half-maximum start of fit_gaussian_feature.
    const double floor = *std::min_element(y.begin(), y.end());
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = y[i] - floor;
        w += v;
        m1 += v * x[i];
        m2 += v * x[i] * x[i];
    }
    if (!(w > 0.0)) throw NumericalError("fit_spectral_peak: flat spectrum");
    const double c0 = m1 / w;
    const double s0 = std::max(std::sqrt(std::max(m2 / w - c0 * c0, 0.0)), x[1] - x[0]);
    const double amp0 = *std::max_element(y.begin(), y.end()) - floor;

    std::vector<double> xs(x.size()), ys(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = (x[i] - c0) / s0;
        ys[i] = (y[i] - floor) / amp0;
    }
    auto prob = curve_problem(
        [](double t, std::span<const double> p) {
            const double z = (t - p[0]) / p[1];
            return p[3] + p[2] * std::exp(-0.5 * z * z);
        },
        xs, ys, {0.0, 1.0, 1.0, 0.0}, {"center", "sigma", "amplitude", "offset"});
    prob.bounds = Bounds::unbounded(4);
    prob.bounds.lower[1] = 1e-6;
    prob.bounds.lower[2] = 0.0;
    LeastSquaresOptions opt;
    opt.max_iterations = 500;
    FitResult fr = damped_least_squares(prob, opt);
    if (!fr.converged) throw NumericalError("fit_spectral_peak: " + fr.message);

    FeatureFit f;
    f.sign = 1;
    f.center = c0 + s0 * fr.values[0];
    f.sigma = s0 * fr.values[1];
    f.amplitude = amp0 * fr.values[2];
    f.offset = floor + amp0 * fr.values[3];
    f.center_error = s0 * fr.errors[0];
    f.sigma_error = s0 * fr.errors[1];
    f.amplitude_error = amp0 * fr.errors[2];
    f.offset_error = amp0 * fr.errors[3];
    f.fwhm = units::fwhm_per_sigma * f.sigma;
    fr.values = {f.center, f.sigma, f.amplitude, f.offset};
    fr.errors = {f.center_error, f.sigma_error, f.amplitude_error, f.offset_error};
    const Eigen::Vector4d sc(s0, s0, amp0, amp0);
    fr.covariance = sc.asDiagonal() * fr.covariance * sc.asDiagonal();
    fr.residual_norm *= amp0;
    f.fit = std::move(fr);
    return f;
}

SincFit fit_sinc_envelope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_sinc_envelope: size mismatch");
    uniform_step(x);
    SincFit s;
    s.envelope = analytic_envelope(y);
    const auto& env = s.envelope;
    const auto [mn_it, mx_it] = std::minmax_element(env.begin(), env.end());
    const auto ie = static_cast<std::size_t>(mx_it - env.begin());
    const double amp0 = *mx_it - *mn_it;
    if (!(amp0 > 0.0)) throw NumericalError("fit_sinc_envelope: flat envelope");
    const double half = *mn_it + 0.5 * amp0;
    std::size_t a = ie, b = ie;
    while (a > 0 && env[a] > half) --a;
    while (b + 1 < env.size() && env[b] > half) ++b;
    const double step = x[1] - x[0];
    const double w0 = std::max(x[b] - x[a], 2.0 * step);
    const double c0 = x[ie];

    std::vector<double> xs(x.size()), ys(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = (x[i] - c0) / w0;
        ys[i] = (env[i] - *mn_it) / amp0;
    }
    auto prob = curve_problem(
        [](double t, std::span<const double> p) { return p[2] * std::abs(sinc(p[1] * (t - p[0]))) + p[3]; }, xs, ys,
        {0.0, 2.0 * kSincHalf, 1.0, 0.0}, {"center", "k", "amplitude", "offset"});
    prob.bounds = Bounds::unbounded(4);
    prob.bounds.lower[1] = 1e-6;
    LeastSquaresOptions opt;
    opt.max_iterations = 500;
    FitResult fr = damped_least_squares(prob, opt);
    if (!fr.converged) throw NumericalError("fit_sinc_envelope: " + fr.message);
    s.center = c0 + w0 * fr.values[0];
    s.k = fr.values[1] / w0;
    s.amplitude = amp0 * fr.values[2];
    s.offset = *mn_it + amp0 * fr.values[3];
    s.fwhm = 2.0 * kSincHalf / s.k;
    double rs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = s.amplitude * std::abs(sinc(s.k * (x[i] - s.center))) + s.offset - env[i];
        rs += d * d;
    }
    s.residual_norm = std::sqrt(rs);
    fr.values = {s.center, s.k, s.amplitude, s.offset};
    fr.errors = {w0 * fr.errors[0], fr.errors[1] / w0, amp0 * fr.errors[2], amp0 * fr.errors[3]};
    fr.residual_norm = s.residual_norm;
    s.fit = std::move(fr);
    try {
        s.gaussian_residual_norm = fit_gaussian_feature(x, env).fit.residual_norm;
    } catch (const NumericalError&) {
        s.gaussian_residual_norm = std::numeric_limits<double>::infinity();
    }
    return s;
}

double two_gaussian_model(double w, double c, double a1, double a2, double s1, double s2) {
    const double z1 = (w - 0.5) / s1, z2 = (w - 1.0) / s2;
    return c + a1 * std::exp(-0.5 * z1 * z1) + a2 * std::exp(-0.5 * z2 * z2);
}

TwoGaussianSpectralFit fit_two_gaussian_spectrum(const SpectrumTrace& spec, std::optional<double> sigma1_fixed,
                                                 double lo, double hi) {
    if (spec.omega.size() != spec.magnitude.size() || spec.omega.empty())
        throw std::invalid_argument("fit_two_gaussian_spectrum: malformed spectrum");
    if (spec.omega.front() > lo || spec.omega.back() < hi)
        throw std::invalid_argument("fit_two_gaussian_spectrum: spectrum does not cover the fit window");
    if (sigma1_fixed && !(*sigma1_fixed > 0.0)) throw std::invalid_argument("fit_two_gaussian_spectrum: sigma1 must be > 0");
    std::vector<double> w, m;
    for (std::size_t i = 0; i < spec.omega.size(); ++i)
        if (spec.omega[i] >= lo && spec.omega[i] <= hi) {
            w.push_back(spec.omega[i]);
            m.push_back(spec.magnitude[i]);
        }
    if (w.size() < 8) throw std::invalid_argument("fit_two_gaussian_spectrum: too few points in the fit window");
    const double scale = std::max(*std::max_element(m.begin(), m.end()), 1e-300);
    for (double& v : m) v /= scale;

    auto nearest = [&](double target) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (std::abs(w[i] - target) < std::abs(w[best] - target)) best = i;
        return m[best];
    };
    const double c0 = *std::min_element(m.begin(), m.end());
    const double a10 = std::max(nearest(0.5) - c0, 0.0);
    const double a20 = std::max(nearest(1.0) - c0, 0.0);
    const double s10 = sigma1_fixed.value_or(0.1);

    auto prob = curve_problem(
        [](double t, std::span<const double> p) { return two_gaussian_model(t, p[0], p[1], p[2], p[3], p[4]); }, w,
        m, {c0, a10, a20, s10, 0.2}, {"c", "a1", "a2", "sigma1", "sigma2"});
    prob.fixed = {false, false, false, sigma1_fixed.has_value(), false};
    prob.bounds = Bounds::unbounded(5);
    // Magnitude spectra: peak amplitudes cannot be negative.
    prob.bounds.lower[1] = 0.0;
    prob.bounds.lower[2] = 0.0;
    prob.bounds.lower[3] = 1e-4;
    prob.bounds.lower[4] = 1e-4;
    prob.bounds.upper[3] = 2.0;
    prob.bounds.upper[4] = 2.0;
    LeastSquaresOptions opt;
    opt.max_iterations = 1000;
    FitResult fr = damped_least_squares(prob, opt);
    if (!fr.converged) throw NumericalError("fit_two_gaussian_spectrum: " + fr.message);
    TwoGaussianSpectralFit f;
    f.sigma1_fixed = sigma1_fixed.has_value();
    f.c = scale * fr.values[0];
    f.a1 = scale * fr.values[1];
    f.a2 = scale * fr.values[2];
    f.sigma1 = fr.values[3];
    f.sigma2 = fr.values[4];
    f.c_error = scale * fr.errors[0];
    f.a1_error = scale * fr.errors[1];
    f.a2_error = scale * fr.errors[2];
    f.sigma1_error = fr.errors[3];
    f.sigma2_error = fr.errors[4];
    for (std::size_t j = 0; j < 3; ++j) fr.values[j] *= scale, fr.errors[j] *= scale;
    fr.residual_norm *= scale;
    f.fit = std::move(fr);
    return f;
}

std::vector<double> savgol_smooth(std::span<const double> x, std::span<const double> y, double window_length,
                                  int order) {
    if (x.size() != y.size()) throw std::invalid_argument("savgol_smooth: size mismatch");
    if (order < 0) throw std::invalid_argument("savgol_smooth: order must be >= 0");
    const double h = uniform_step(x);
    auto m = static_cast<long>(std::lround(window_length / h));
    if (m % 2 == 0) ++m;
    if (m < order + 2) throw std::invalid_argument("savgol_smooth: window covers fewer than order + 2 samples");
    const auto n = static_cast<long>(y.size());
    if (m > n) throw std::invalid_argument("savgol_smooth: window longer than the trace");
    const long half = m / 2;
    Eigen::MatrixXd A(m, order + 1);
    for (long j = 0; j < m; ++j)
        for (int p = 0; p <= order; ++p) A(j, p) = std::pow(static_cast<double>(j - half) / std::max(half, 1L), p);
    // Hat matrix: row i maps the window samples to the fitted value at offset i.
    const Eigen::MatrixXd P = A * A.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(m, m));
    std::vector<double> out(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        long start, row;
        if (i < half) {
            start = 0;
            row = i;
        } else if (i >= n - half) {
            start = n - m;
            row = i - start;
        } else {
            start = i - half;
            row = half;
        }
        double s = 0.0;
        for (long j = 0; j < m; ++j) s += P(row, j) * y[static_cast<std::size_t>(start + j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

Envelopes envelope_minmax(std::span<const double> x, const std::vector<std::vector<double>>& traces,
                          double window_length, int order) {
    if (traces.empty()) throw std::invalid_argument("envelope_minmax: no traces");
    const std::size_t n = x.size();
    for (const auto& t : traces)
        if (t.size() != n) throw std::invalid_argument("envelope_minmax: trace length mismatch");
    std::vector<double> mu, sd;
    for (const auto& t : traces) {
        const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(n);
        double v = 0.0;
        for (double q : t) v += (q - mean) * (q - mean);
        mu.push_back(mean);
        sd.push_back(std::sqrt(v / static_cast<double>(n)));
    }
    const double gm = std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(mu.size());
    const double gs = std::accumulate(sd.begin(), sd.end(), 0.0) / static_cast<double>(sd.size());
    Envelopes e;
    e.single_run = traces.size() == 1;
    e.upper.assign(n, -std::numeric_limits<double>::infinity());
    e.lower.assign(n, std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const double scale = sd[r] > 0.0 ? gs / sd[r] : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = (traces[r][i] - mu[r]) * scale + gm;
            e.upper[i] = std::max(e.upper[i], v);
            e.lower[i] = std::min(e.lower[i], v);
        }
    }
    e.upper = savgol_smooth(x, e.upper, window_length, order);
    e.lower = savgol_smooth(x, e.lower, window_length, order);
    return e;
}

}  // namespace qoct
