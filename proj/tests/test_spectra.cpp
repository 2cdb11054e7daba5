#include "doctest.h"

#include "qoct/error.hpp"
#include "qoct/spectra.hpp"
#include "qoct/units.hpp"

#include <cmath>
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

// Composite trapezoid on [a, b] with n intervals.
template <class F>
double trapz(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i) s += f(a + i * h);
    return s * h;
}

}  // namespace

TEST_CASE("gaussian_pdf peak, symmetry and normalization") {
    const GaussianSpectrum g{2.0e15, 3.0e13};
    CHECK(gaussian_pdf(g.center, g) == doctest::Approx(1.0 / (std::sqrt(2.0 * units::pi) * g.std)).epsilon(1e-14));
    for (double x : {1e12, 7e12, 4.5e13})
        CHECK(gaussian_pdf(g.center + x, g) == doctest::Approx(gaussian_pdf(g.center - x, g)).epsilon(1e-14));
    const double I = trapz([&](double w) { return gaussian_pdf(w, g); }, g.center - 8 * g.std, g.center + 8 * g.std, 4000);
    CHECK(I <= 1.0);
    CHECK(I >= 1.0 - 1e-9);
    // argmax stays at the center
    CHECK(gaussian_pdf(g.center, g) > gaussian_pdf(g.center + 1e-3 * g.std, g));
    CHECK(gaussian_pdf(g.center, g) > gaussian_pdf(g.center - 1e-3 * g.std, g));
}

TEST_CASE("invalid spectra are rejected") {
    CHECK_THROWS_AS((GaussianSpectrum{1.0, 0.0}.validate()), std::invalid_argument);
    SpdcSource s = reference_source();
    s.pump_std = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("narrow pump produces no warning, broad pump does") {
    SpdcSource s = reference_source();
    CHECK(s.validate().empty());
    s.pump_std = 0.5 * s.phasematch_std;
    CHECK_FALSE(s.validate().empty());
    CHECK(s.delta_plus() >= s.phasematch_std);
}

TEST_CASE("joint density at the degenerate point and under exchange") {
    const SpdcSource s = reference_source();
    const double w0 = 0.5 * s.pump_center;
    CHECK(joint_density(w0, w0, s) ==
          doctest::Approx(2.0 / (2.0 * units::pi * s.phasematch_std * s.pump_std)).epsilon(1e-12));
    for (double a : {-3.0, -0.7, 0.4, 2.2})
        for (double b : {-1.5, 0.0, 0.9}) {
            const double ws = w0 + a * s.phasematch_std, wi = w0 + b * s.phasematch_std + 1e9;
            CHECK(joint_density(ws, wi, s) == doctest::Approx(joint_density(wi, ws, s)).epsilon(1e-14));
        }
}

TEST_CASE("joint density total probability") {
    // Rotated coordinates u = ws - wi, v = ws + wi (Jacobian 1/2). With unit
    // Gaussians the total is 1.
    const SpdcSource s = reference_source();
    const double D = s.phasematch_std, d = s.pump_std;
    const double I = trapz(
        [&](double u) {
            return trapz(
                [&](double v) { return 0.5 * joint_density(0.5 * (u + v), 0.5 * (v - u), s); },
                s.pump_center - 8 * d, s.pump_center + 8 * d, 400);
        },
        -8 * D, 8 * D, 400);
    CHECK(I == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("marginal width and consistency with the joint density") {
    SpdcSource s = reference_source();
    const auto m = marginal(s);
    CHECK(m.center == doctest::Approx(0.5 * s.pump_center).epsilon(1e-15));
    CHECK(m.std == doctest::Approx(units::pi * 8.7e12).epsilon(1e-6));

    SpdcSource narrow = s;
    narrow.pump_std = 1e-9 * s.phasematch_std;
    CHECK(marginal(narrow).std == doctest::Approx(0.5 * s.phasematch_std).epsilon(1e-15));

    for (double k : {-2.5, -1.0, 0.0, 0.3, 1.7}) {
        const double ws = m.center + k * m.std;
        // integrand in wi is centred at wp - ws with width ~ delta
        const double c = s.pump_center - ws;
        const double I = trapz([&](double wi) { return joint_density(ws, wi, s); }, c - 12 * s.pump_std,
                               c + 12 * s.pump_std, 2000);
        CHECK(I == doctest::Approx(gaussian_pdf(ws, m)).epsilon(1e-6));
    }
}

TEST_CASE("tabulated spectra: validation and interpolation") {
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({1.0 + i, i < 5 ? i : 9 - i});
    const auto t = load_tabulated(rows);
    CHECK(t.evaluate(2.5) == doctest::Approx(1.5));
    CHECK(t.evaluate(0.5) == 0.0);
    CHECK(t.evaluate(11.0) == 0.0);

    auto dup = rows;
    dup[4].first = dup[3].first;
    CHECK_THROWS_AS(load_tabulated(dup), ConfigError);
    auto neg = rows;
    neg[2].second = -1.0;
    CHECK_THROWS_AS(load_tabulated(neg), ConfigError);
    CHECK_THROWS_AS(load_tabulated({rows.begin(), rows.begin() + 5}), ConfigError);

    std::vector<std::pair<double, double>> flat;
    for (int i = 0; i < 10; ++i) flat.push_back({1.0 + i, 3.0});
    CHECK_THROWS_AS(fit_gaussian(load_tabulated(flat)), ConfigError);
}

TEST_CASE("gaussian fit of tabulated data") {
    const GaussianSpectrum g{1.435e15, 2.7e13};
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i <= 200; ++i) {
        const double w = g.center - 6 * g.std + i * 12 * g.std / 200;
        rows.push_back({w, 3.0 * gaussian_pdf(w, g)});
    }
    const auto f = fit_gaussian(load_tabulated(rows));
    CHECK(f.spectrum.center == doctest::Approx(g.center).epsilon(1e-9));
    CHECK(f.spectrum.std == doctest::Approx(g.std).epsilon(1e-9));
    CHECK(f.amplitude == doctest::Approx(3.0).epsilon(1e-9));

    std::mt19937_64 rng(7);
    const double peak = 3.0 * gaussian_pdf(g.center, g);
    std::uniform_real_distribution<double> u(-0.01 * peak, 0.01 * peak);
    for (int trial = 0; trial < 10; ++trial) {
        auto noisy = rows;
        for (auto& r : noisy) r.second = std::max(0.0, r.second + u(rng));
        const auto fn = fit_gaussian(load_tabulated(noisy));
        CHECK(std::abs(fn.spectrum.center - g.center) < 0.1 * g.std);
    }
}
