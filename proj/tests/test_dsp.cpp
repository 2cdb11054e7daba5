#include "doctest.h"

#include "qoct/acquisition.hpp"
#include "qoct/dsp.hpp"
#include "qoct/error.hpp"
#include "qoct/interferometer.hpp"
#include "qoct/material.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace qoct;

namespace {

SpdcSource reference_source() {
    SpdcSource s;
    s.pump_center = units::wavelength_to_omega(656.5e-9);
    s.pump_std = units::hz_to_omega(6.9e9);
    s.phasematch_std = units::hz_to_omega(8.7e12);
    return s;
}

std::vector<double> mirror_grid(double lo_um, double hi_um, double step_um) {
    std::vector<double> t;
    const int n = static_cast<int>(std::lround((hi_um - lo_um) / step_um)) + 1;
    for (int i = 0; i < n; ++i) t.push_back(units::mirror_to_delay((lo_um + i * step_um) * 1e-6));
    return t;
}

std::vector<double> to_um(const std::vector<double>& tau) {
    std::vector<double> x(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) x[i] = units::delay_to_mirror(tau[i]) / units::um;
    return x;
}

double variance(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

double fwhm(const std::vector<double>& x, const std::vector<double>& y) {
    const auto it = std::max_element(y.begin(), y.end());
    const std::size_t p = static_cast<std::size_t>(it - y.begin());
    const double half = 0.5 * *it;
    std::size_t a = p, b = p;
    while (a > 0 && y[a] > half) --a;
    while (b + 1 < y.size() && y[b] > half) ++b;
    const double xa = x[a] + (half - y[a]) * (x[a + 1] - x[a]) / (y[a + 1] - y[a]);
    const double xb = x[b - 1] + (half - y[b - 1]) * (x[b] - x[b - 1]) / (y[b] - y[b - 1]);
    return xb - xa;
}

}  // namespace

TEST_CASE("uniform grid check") {
    CHECK(uniform_step(std::vector<double>{0.0, 0.5, 1.0}) == 0.5);
    CHECK_THROWS_AS(uniform_step(std::vector<double>{0.0}), std::invalid_argument);
    CHECK_THROWS_AS(uniform_step(std::vector<double>{0.0, 0.5, 1.2}), std::invalid_argument);
    CHECK_THROWS_AS(dft_magnitude(std::vector<double>{0.0, 1.0, 3.0}, std::vector<double>{1, 2, 3}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("DFT peaks") {
    const SpdcSource src = reference_source();
    const auto tau = mirror_grid(-30, 30, 0.07);
    std::vector<double> cosine(tau.size()), dip(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        cosine[i] = std::cos(src.pump_center * tau[i]);
        dip[i] = 1.0 - 0.5 * std::exp(-0.5 * std::pow(tau[i] * src.phasematch_std, 2));
    }
    auto s = dft_magnitude(tau, cosine, src.pump_center);
    const double bin = s.omega[1] - s.omega[0];
    auto k = std::max_element(s.magnitude.begin(), s.magnitude.end()) - s.magnitude.begin();
    CHECK(std::abs(s.omega[k] - 1.0) <= bin);

    // mean-removed dip: all content sits near zero frequency
    const double m = std::accumulate(dip.begin(), dip.end(), 0.0) / dip.size();
    for (double& v : dip) v -= m;
    s = dft_magnitude(tau, dip, src.pump_center);
    k = std::max_element(s.magnitude.begin(), s.magnitude.end()) - s.magnitude.begin();
    CHECK(s.omega[k] < 3 * src.phasematch_std / src.pump_center);

    // no M1 line in the cross scheme
    const auto cross = compose(closed_form_terms(src, SingleLayer{1.0, 0.0}, tau), Scheme::crosscorrelation);
    s = dft_magnitude(tau, cross.values, src.pump_center);
    const double mx = *std::max_element(s.magnitude.begin(), s.magnitude.end());
    double at_half = 0.0;
    for (std::size_t j = 0; j < s.omega.size(); ++j)
        if (std::abs(s.omega[j] - 0.5) < 0.1) at_half = std::max(at_half, s.magnitude[j]);
    CHECK(at_half < 0.01 * mx);
}

TEST_CASE("Parseval") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t len : {64u, 101u, 858u, 1000u}) {
        std::vector<double> v(len);
        for (double& x : v) x = n(rng);
        CHECK(spectral_energy(v) == doctest::Approx(signal_energy(v)).epsilon(1e-9));
    }
}

TEST_CASE("low-pass extraction") {
    const SpdcSource src = reference_source();
    const auto tau = mirror_grid(-30, 30, 0.07);
    const auto terms = closed_form_terms(src, SingleLayer{1.0, 0.0}, tau);
    const auto cross = compose(terms, Scheme::crosscorrelation);

    // content below the cutoff passes unchanged
    std::vector<double> slow(tau.size());
    const double n = static_cast<double>(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i)
        slow[i] = 2.0 + std::cos(units::two_pi * 3 * i / n) + 0.5 * std::sin(units::two_pi * 7 * i / n);
    const auto ls = lowpass_extract(tau, slow, src.pump_center, 0.06);
    for (std::size_t i = 0; i < tau.size(); ++i) CHECK(ls[i] == doctest::Approx(slow[i]).epsilon(1e-9).scale(1.0));

    const auto once = lowpass_extract(tau, cross.values, src.pump_center, 0.06);
    const auto twice = lowpass_extract(tau, once, src.pump_center, 0.06);
    for (std::size_t i = 0; i < tau.size(); ++i) CHECK(std::abs(once[i] - twice[i]) < 1e-12);

    // residual carrier against the analytic HOM dip
    double worst = 0.0, depth = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double ref = terms.Mc / 2 - terms.M0[i] / 2;
        worst = std::max(worst, std::abs(once[i] - ref));
        depth = std::max(depth, terms.M0[i] / 2);
    }
    CHECK(worst < 0.01 * depth);

    const auto x = to_um(tau);
    const auto f = fit_gaussian_feature(x, once);
    const double expect = units::delay_to_mirror(units::fwhm_per_sigma / src.phasematch_std) / units::um;
    CHECK(f.fwhm == doctest::Approx(expect).epsilon(0.02));
    CHECK(f.sign == -1);

    CHECK_THROWS_AS(lowpass_extract(tau, cross.values, src.pump_center, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lowpass_extract(tau, cross.values, src.pump_center, 5.0), std::invalid_argument);
}

TEST_CASE("gaussian feature fit") {
    std::vector<double> x, y;
    for (int i = 0; i <= 400; ++i) {
        x.push_back(-20 + 0.1 * i);
        y.push_back(10.0 - 4.0 * std::exp(-0.5 * std::pow((x.back() - 1.3) / 2.7, 2)));
    }
    const auto f = fit_gaussian_feature(x, y);
    CHECK(f.sign == -1);
    CHECK(f.center == doctest::Approx(1.3).epsilon(1e-8));
    CHECK(f.sigma == doctest::Approx(2.7).epsilon(1e-8));
    CHECK(f.amplitude == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(f.offset == doctest::Approx(10.0).epsilon(1e-8));
    CHECK(f.fwhm == doctest::Approx(units::fwhm_per_sigma * 2.7).epsilon(1e-8));

    std::vector<double> peak = y;
    for (double& v : peak) v = 20.0 - v;
    CHECK(fit_gaussian_feature(x, peak).sign == 1);

    CHECK_THROWS_AS(fit_gaussian_feature(x, std::vector<double>(x.size(), 1.0)), NumericalError);

    // shot noise at SNR ~ 30 on the dip depth
    std::vector<double> centers;
    const double scale = 225.0;  // counts per unit: depth 4 -> 900 counts, sqrt(baseline) ~ 47
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::mt19937_64 g(split_seed(31, s));
        std::vector<double> c(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            c[i] = static_cast<double>(std::poisson_distribution<long long>(scale * y[i])(g));
        const auto fn = fit_gaussian_feature(x, c);
        centers.push_back(fn.center);
        CHECK(fn.center_error < f.fwhm / 20);
    }
    CHECK(std::sqrt(variance(centers)) < f.fwhm / 20);
}

TEST_CASE("sinc envelope fit") {
    std::vector<double> x, y;
    const double k = 0.4, c0 = 2.0;
    for (int i = 0; i <= 3000; ++i) {
        x.push_back(-60 + 0.04 * i);
        const double u = k * (x.back() - c0);
        const double s = std::abs(u) < 1e-12 ? 1.0 : std::sin(u) / u;
        y.push_back(1.0 + 0.8 * s * std::cos(2 * units::pi * x.back() / 0.33));
    }
    const auto f = fit_sinc_envelope(x, y);
    CHECK(f.fwhm == doctest::Approx(2 * 1.8954942670339809 / k).epsilon(0.01));
    CHECK(f.center == doctest::Approx(c0).epsilon(0.01));
    CHECK(f.residual_norm < f.gaussian_residual_norm);

    // a rectangular source spectrum gives a sinc envelope
    const double wc = units::wavelength_to_omega(1313e-9), W = 2 * units::pi * 8e12;
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i <= 2000; ++i) {
        const double w = wc - W + i * 2 * W / 2000;
        rows.push_back({w, std::abs(w - wc) <= W / 2 ? 1.0 : 0.0});
    }
    const auto tau = mirror_grid(-60, 60, 0.05);
    const auto rect = single_photon_interferogram(load_tabulated(rows), SingleLayer{1.0, 0.0}, tau);
    const auto fr = fit_sinc_envelope(to_um(tau), rect.values);
    CHECK(fr.residual_norm < fr.gaussian_residual_norm);
    // envelope sinc(W tau / 2) on the delay axis
    CHECK(fr.k == doctest::Approx(W / 2 * units::mirror_to_delay(1e-6)).epsilon(0.02));

    // and a Gaussian source prefers the Gaussian shape
    GaussianSpectrum g{wc, W / 4};
    const auto gi = single_photon_interferogram(g, SingleLayer{1.0, 0.0}, tau);
    const auto fg = fit_sinc_envelope(to_um(tau), gi.values);
    CHECK(fg.residual_norm > fg.gaussian_residual_norm);

    std::vector<double> no_carrier(x.size(), 2.0);
    for (std::size_t i = 0; i < x.size(); ++i) no_carrier[i] += std::exp(-x[i] * x[i] / 200);
    CHECK_THROWS_AS(fit_sinc_envelope(x, no_carrier), NumericalError);
}

TEST_CASE("two-gaussian spectral fit") {
    SpectrumTrace s;
    for (int i = 0; i <= 600; ++i) s.omega.push_back(i * 2.4 / 600);
    auto fill = [&](double c, double a1, double a2, double s1, double s2) {
        s.magnitude.clear();
        for (double w : s.omega) s.magnitude.push_back(two_gaussian_model(w, c, a1, a2, s1, s2));
    };
    fill(4.6, 112, 39, 0.16, 0.40);
    auto f = fit_two_gaussian_spectrum(s);
    CHECK(f.c == doctest::Approx(4.6).epsilon(1e-6));
    CHECK(f.a1 == doctest::Approx(112).epsilon(1e-6));
    CHECK(f.a2 == doctest::Approx(39).epsilon(1e-6));
    CHECK(f.sigma1 == doctest::Approx(0.16).epsilon(1e-6));
    CHECK(f.sigma2 == doctest::Approx(0.40).epsilon(1e-6));
    CHECK_FALSE(f.sigma1_fixed);

    f = fit_two_gaussian_spectrum(s, 0.16);
    CHECK(f.sigma1_fixed);
    CHECK(f.sigma1 == 0.16);
    CHECK(f.sigma1_error == 0.0);
    CHECK(f.sigma2 == doctest::Approx(0.40).epsilon(1e-6));

    // noisy synthetic spectra: recovered within the reported uncertainty
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 2.0);
    auto noisy = s;
    for (double& v : noisy.magnitude) v += n(rng);
    f = fit_two_gaussian_spectrum(noisy, 0.16);
    CHECK(std::abs(f.a1 - 112) < 4 * f.a1_error);
    CHECK(std::abs(f.a2 - 39) < 4 * f.a2_error);
    CHECK(std::abs(f.sigma2 - 0.40) < 4 * f.sigma2_error);

    fill(4.6, 0.0, 39, 0.16, 0.40);
    f = fit_two_gaussian_spectrum(s, 0.16);
    CHECK(f.a1 < 0.01 * f.a2);

    fill(4.6, 0.0, 0.0, 0.16, 0.40);
    f = fit_two_gaussian_spectrum(s, 0.16);
    CHECK(f.c == doctest::Approx(4.6).epsilon(1e-9));
    CHECK(std::abs(f.a1) < 1e-6);
    CHECK(std::abs(f.a2) < 1e-6);

    SpectrumTrace short_spec = s;
    short_spec.omega.resize(100);
    short_spec.magnitude.resize(100);
    CHECK_THROWS_AS(fit_two_gaussian_spectrum(short_spec), std::invalid_argument);
}

TEST_CASE("spectral peak fit and run-averaged spectra") {
    SpectrumTrace s;
    for (int i = 0; i <= 500; ++i) {
        s.omega.push_back(i * 2.0 / 500);
        s.magnitude.push_back(3.0 + 50.0 * std::exp(-0.5 * std::pow((s.omega.back() - 0.48) / 0.16, 2)));
    }
    const auto f = fit_spectral_peak(s);
    CHECK(f.center == doctest::Approx(0.48).epsilon(1e-6));
    CHECK(f.sigma == doctest::Approx(0.16).epsilon(1e-6));

    const std::vector<double> tau{0, 1, 2, 3, 4, 5, 6, 7};
    const std::vector<std::vector<double>> runs{{1, 0, 1, 0, 1, 0, 1, 0}, {0, 1, 0, 1, 0, 1, 0, 1}};
    const auto m = mean_dft_magnitude(tau, runs, 1.0);
    const auto a = dft_magnitude(tau, runs[0], 1.0);
    for (std::size_t k = 0; k < m.magnitude.size(); ++k) CHECK(m.magnitude[k] == doctest::Approx(a.magnitude[k]));
}

TEST_CASE("Savitzky-Golay smoothing") {
    std::vector<double> x, y;
    for (int i = 0; i < 500; ++i) {
        x.push_back(0.07 * i);
        const double t = x.back();
        y.push_back(1.0 - 0.3 * t + 0.02 * t * t - 0.001 * t * t * t);
    }
    const auto s = savgol_smooth(x, y, 17.0, 3);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(s[i] == doctest::Approx(y[i]).epsilon(1e-9).scale(1.0));

    CHECK_THROWS_AS(savgol_smooth(x, y, 0.2, 3), std::invalid_argument);
    CHECK_THROWS_AS(savgol_smooth(x, y, 100.0, 3), std::invalid_argument);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> w(x.size());
    for (double& v : w) v = n(rng);
    CHECK(variance(savgol_smooth(x, w, 17.0, 3)) < variance(w));
}

TEST_CASE("min/max envelopes") {
    std::vector<double> x, run;
    for (int i = 0; i < 2000; ++i) {
        x.push_back(-70 + 0.07 * i);
        run.push_back(5.0 + std::exp(-x.back() * x.back() / 800) * std::cos(2 * units::pi * x.back() / 0.33));
    }
    const auto same = envelope_minmax(x, {run, run, run}, 17.0, 3);
    const auto ref = savgol_smooth(x, run, 17.0, 3);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(same.upper[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(same.lower[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
    CHECK(envelope_minmax(x, {run}, 17.0, 3).single_run);

    // carrier phases spread over the runs: envelopes follow +-|envelope|
    std::vector<std::vector<double>> runs;
    for (int k = 0; k < 16; ++k) {
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            r[i] = 5.0 + std::exp(-x[i] * x[i] / 800) * std::cos(2 * units::pi * x[i] / 0.33 + units::two_pi * k / 16);
        runs.push_back(r);
    }
    const auto e = envelope_minmax(x, runs, 17.0, 3);
    for (std::size_t i = 0; i < x.size(); i += 50) {
        const double env = std::exp(-x[i] * x[i] / 800);
        CHECK(e.upper[i] - 5.0 == doctest::Approx(env).epsilon(0.05).scale(0.05));
        CHECK(5.0 - e.lower[i] == doctest::Approx(env).epsilon(0.05).scale(0.05));
    }
}

TEST_CASE("min/max envelope of noisy dispersive runs tracks alpha1") {
    const SpdcSource src = reference_source();
    const auto& si = MaterialLibrary::builtin().get("silicon");
    DispersiveSlab slab;
    slab.thickness = 5e-3;
    slab.material = si;
    slab.index_model = IndexModel::linearized;
    slab.reference_omega = src.degenerate_center();
    const double x0 = units::delay_to_mirror(slab.group_delay(src.degenerate_center())) / units::um;
    const auto tau = mirror_grid(x0 - 160, x0 + 160, 0.07);
    const auto x = to_um(tau);
    const auto terms = single_photon_terms(marginal(src), slab, tau);

    std::vector<std::vector<double>> runs;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> phase(0.0, units::two_pi / terms.carrier);
    for (std::uint64_t r = 0; r < 8; ++r) {
        const std::vector<double> eps(tau.size(), phase(rng));
        const auto v = apply_phase_jitter(terms, eps).values();
        std::vector<double> counts(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::mt19937_64 g(split_seed(r, i));
            counts[i] = static_cast<double>(std::poisson_distribution<long long>(2e4 * v[i])(g));
        }
        runs.push_back(counts);
    }
    const auto e = envelope_minmax(x, runs, 17.0, 3);
    std::vector<double> span(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) span[i] = e.upper[i] - e.lower[i];
    // remove the noise-only spread far from the feature
    std::vector<double> wings(span.begin(), span.begin() + 300);
    wings.insert(wings.end(), span.end() - 300, span.end());
    std::nth_element(wings.begin(), wings.begin() + wings.size() / 2, wings.end());
    const double base = wings[wings.size() / 2];
    for (double& v : span) v -= base;

    const double clean = units::delay_to_mirror(2 * units::fwhm_per_sigma / src.delta_plus()) / units::um;
    const double alpha1 = broadening_factors(src, si, 5e-3).alpha1;
    CHECK(fwhm(x, span) / clean == doctest::Approx(alpha1).epsilon(0.10));
}
