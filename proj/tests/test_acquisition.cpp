#include "doctest.h"

#include "qoct/acquisition.hpp"
#include "qoct/dsp.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

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

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_std(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
}

// Peak position of a magnitude spectrum inside [lo, hi], refined by a parabola
// through the three highest bins.
double spectral_peak(const SpectrumTrace& sp, double lo, double hi) {
    std::size_t best = 0;
    for (std::size_t k = 1; k + 1 < sp.omega.size(); ++k)
        if (sp.omega[k] >= lo && sp.omega[k] <= hi && (best == 0 || sp.magnitude[k] > sp.magnitude[best])) best = k;
    const double ym = sp.magnitude[best - 1], y0 = sp.magnitude[best], yp = sp.magnitude[best + 1];
    return sp.omega[best] + 0.5 * (ym - yp) / (ym - 2 * y0 + yp) * (sp.omega[1] - sp.omega[0]);
}

Interferogram flat(double value, std::size_t n, Kind kind) {
    Interferogram f;
    f.kind = kind;
    f.tau = mirror_grid(0, 0.07 * (n - 1), 0.07);
    f.values.assign(n, value);
    return f;
}

}  // namespace

TEST_CASE("zero jitter is the identity") {
    const auto tau = mirror_grid(-10, 10, 0.07);
    const auto t = closed_form_terms(reference_source(), SingleLayer{0.9, 0.0}, tau);
    const auto j = apply_phase_jitter(t, 0.0, 42);
    CHECK(j.M0 == t.M0);
    CHECK(j.M1 == t.M1);
    CHECK(j.M2 == t.M2);
}

TEST_CASE("jitter rotates carriers only") {
    const auto tau = mirror_grid(-10, 10, 0.07);
    const auto t = closed_form_terms(reference_source(), SingleLayer{0.9, 0.0}, tau);
    const auto j = apply_phase_jitter(t, 200e-9, 5);
    CHECK(j.M0 == t.M0);
    CHECK(j.Mc == t.Mc);
    bool moved = false;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        CHECK(std::abs(j.Z1[i]) == doctest::Approx(std::abs(t.Z1[i])).epsilon(1e-12));
        CHECK(std::abs(j.Z2[i]) == doctest::Approx(std::abs(t.Z2[i])).epsilon(1e-12));
        moved = moved || std::abs(j.M2[i] - t.M2[i]) > 1e-6;
    }
    CHECK(moved);

    // explicit delay errors: M1 gains w0 eps, M2 gains wp eps
    std::vector<double> eps(tau.size(), 1e-16);
    const auto e = apply_phase_jitter(t, eps);
    const double w0 = t.omega0;
    for (std::size_t i = 0; i < tau.size(); i += 37) {
        CHECK(std::abs(e.Z1[i] - t.Z1[i] * std::polar(1.0, -w0 * 1e-16)) < 1e-14);
        CHECK(std::abs(e.Z2[i] - t.Z2[i] * std::polar(1.0, -2 * w0 * 1e-16)) < 1e-14);
    }
}

TEST_CASE("jitter draws are deterministic and have the requested spread") {
    // std and correlation are optical path (m); draws are delays (s)
    const double path = 100e-9, s = path / units::c, step = 1e-16;
    const auto a = draw_jitter(20000, step, path, 0.0, 99);
    const auto b = draw_jitter(20000, step, path, 0.0, 99);
    CHECK(a == b);
    CHECK(std::abs(mean(a)) < 5 * s / std::sqrt(20000.0));
    CHECK(sample_std(a) == doctest::Approx(s).epsilon(0.03));
    const auto c = draw_jitter(20000, step, path, 50 * step * units::c, 99);
    CHECK(sample_std(c) == doctest::Approx(s).epsilon(0.15));
    // neighbours are correlated
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        num += c[i] * c[i + 1];
        den += c[i] * c[i];
    }
    CHECK(num / den > 0.9);
}

TEST_CASE("carrier-proportional jitter doubles the M2 spectral spread") {
    // Path noise correlated over the scan acts as a random scan-rate error:
    // every realisation shifts the M2 peak twice as far as the M1 peak.
    const SpdcSource src = reference_source();
    const auto tau = mirror_grid(-30, 30, 0.07);
    const auto t = closed_form_terms(src, SingleLayer{1.0, 0.0}, tau);
    std::vector<double> p1, p2;
    for (int r = 0; r < 10; ++r) {
        const auto j = apply_phase_jitter(t, 30e-6, split_seed(1, r), 300e-6);
        p1.push_back(spectral_peak(dft_magnitude(tau, j.M1, src.pump_center), 0.2, 0.8));
        p2.push_back(spectral_peak(dft_magnitude(tau, j.M2, src.pump_center), 0.4, 1.6));
    }
    CHECK(sample_std(p2) / sample_std(p1) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("HOM dip width is immune to carrier jitter") {
    const SpdcSource src = reference_source();
    const auto tau = mirror_grid(-30, 30, 0.07);
    const auto t = closed_form_terms(src, SingleLayer{1.0, 0.0}, tau);
    const auto clean = compose(t, Scheme::crosscorrelation);
    const auto noisy = compose(apply_phase_jitter(t, 656.5e-9 / 4, 8, 513e-9), Scheme::crosscorrelation);
    std::vector<double> x(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) x[i] = units::delay_to_mirror(tau[i]) / units::um;
    const auto fc = fit_gaussian_feature(x, lowpass_extract(tau, clean.values, src.pump_center, 0.06));
    const auto fn = fit_gaussian_feature(x, lowpass_extract(tau, noisy.values, src.pump_center, 0.06));
    CHECK(fn.fwhm == doctest::Approx(fc.fwhm).epsilon(0.01));
}

TEST_CASE("expected-value jitter damping") {
    const auto tau = mirror_grid(-5, 5, 0.07);
    const auto t = closed_form_terms(reference_source(), SingleLayer{1.0, 0.0}, tau);
    const double s = 100e-9;
    const auto a = average_phase_jitter(t, s);
    const double d1 = std::exp(-0.5 * std::pow(t.omega0 * s / units::c, 2));
    const double d2 = std::exp(-0.5 * std::pow(2 * t.omega0 * s / units::c, 2));
    for (std::size_t i = 0; i < tau.size(); i += 11) {
        CHECK(std::abs(a.Z1[i] - d1 * t.Z1[i]) < 1e-14);
        CHECK(std::abs(a.Z2[i] - d2 * t.Z2[i]) < 1e-14);
    }
}

TEST_CASE("detection rates") {
    NoiseModel unit;
    unit.pair_rate = 1.0;
    const auto cross = flat(0.3, 10, Kind::crosscorrelation);
    const auto r = detection_rates(cross, Scheme::crosscorrelation, unit);
    for (double v : r.rate) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
    // the auto scheme loses half to the output splitter
    const auto ra = detection_rates(flat(0.3, 10, Kind::autocorrelation), Scheme::autocorrelation, unit);
    for (double v : ra.rate) CHECK(v == doctest::Approx(0.15).epsilon(1e-15));
    CHECK_THROWS_AS(detection_rates(cross, Scheme::autocorrelation, unit), std::invalid_argument);

    NoiseModel dark;
    dark.pair_rate = 0.0;
    dark.dark_rate = {1000, 2000, 3000};
    dark.coincidence_window = 1e-9;
    const auto rd = detection_rates(cross, Scheme::crosscorrelation, dark);
    for (double v : rd.rate) CHECK(v == doctest::Approx(1e-9 * 1000 * 5000).epsilon(1e-12));

    // measured M0 modulation: cross is four times auto
    NoiseModel eq;
    eq.pair_rate = 1e6;
    eq.efficiency = {0.5, 0.5, 0.5};
    const auto tau = mirror_grid(-20, 20, 0.5);
    const auto t = closed_form_terms(reference_source(), SingleLayer{1.0, 0.0}, tau);
    InterferogramTerms only_m0 = t;
    std::fill(only_m0.M1.begin(), only_m0.M1.end(), 0.0);
    std::fill(only_m0.M2.begin(), only_m0.M2.end(), 0.0);
    const auto xc = detection_rates(compose(only_m0, Scheme::crosscorrelation), Scheme::crosscorrelation, eq);
    const auto xa = detection_rates(compose(only_m0, Scheme::autocorrelation), Scheme::autocorrelation, eq);
    const std::size_t mid = tau.size() / 2;
    const double depth_c = xc.rate.front() - xc.rate[mid], depth_a = xa.rate[mid] - xa.rate.front();
    CHECK(depth_c / depth_a == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("step scan counts") {
    RateTrace zero;
    zero.tau = mirror_grid(0, 10, 0.07);
    zero.rate.assign(zero.tau.size(), 0.0);
    ScanPlan plan;
    plan.tau_start = zero.tau.front();
    plan.tau_end = zero.tau.back();
    const auto m = simulate_scan(zero, plan, 1);
    for (double c : m.counts) CHECK(c == 0.0);

    RateTrace r = zero;
    std::fill(r.rate.begin(), r.rate.end(), 1000.0);
    const auto a = simulate_scan(r, plan, 77), b = simulate_scan(r, plan, 77);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != simulate_scan(r, plan, 78).counts);

    plan.tau_end = zero.tau.back() * 2;
    CHECK_THROWS_AS(simulate_scan(r, plan, 1), std::invalid_argument);
}

TEST_CASE("poisson mean and variance") {
    RateTrace r;
    r.tau = {0.0, 1e-12};
    r.rate = {250.0, 250.0};
    ScanPlan plan;
    plan.mode = StepScan{1e-3, 0.2};  // one point on the 150 um span
    plan.tau_start = 0.0;
    plan.tau_end = 1e-12;
    std::vector<double> first;
    for (int s = 0; s < 1000; ++s) first.push_back(simulate_scan(r, plan, split_seed(2024, s)).counts[0]);
    const double m = mean(first), v = sample_std(first) * sample_std(first);
    CHECK(m == doctest::Approx(50.0).epsilon(0.02));
    CHECK(v / m >= 0.9);
    CHECK(v / m <= 1.1);

    // expected counts scale linearly with pair rate and exposure
    NoiseModel n1, n2;
    n1.pair_rate = 1e5;
    n2.pair_rate = 3e5;
    const auto ifg = flat(0.2, 50, Kind::crosscorrelation);
    ScanPlan p1, p2;
    p1.mode = StepScan{70e-9, 0.1};
    p2.mode = StepScan{70e-9, 0.4};
    p1.tau_start = p2.tau_start = ifg.tau.front();
    p1.tau_end = p2.tau_end = ifg.tau.back();
    const auto e1 = expected_counts(detection_rates(ifg, Scheme::crosscorrelation, n1), p1);
    const auto e2 = expected_counts(detection_rates(ifg, Scheme::crosscorrelation, n2), p2);
    for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e2[i] == doctest::Approx(12.0 * e1[i]).epsilon(1e-12));
}

TEST_CASE("continuous scan integrates the rate over each bin") {
    // A cosine with period equal to the bin averages to its mean.
    RateTrace r;
    const double period = units::mirror_to_delay(300e-9);
    for (int i = 0; i <= 4000; ++i) {
        const double t = i * 40 * period / 4000;
        r.tau.push_back(t);
        r.rate.push_back(100.0 + 50.0 * std::cos(units::two_pi * t / period));
    }
    ScanPlan plan;
    plan.mode = ContinuousScan{16.7e-9, 300e-9};
    plan.tau_start = 0.0;
    plan.tau_end = r.tau.back();
    const auto e = expected_counts(r, plan);
    const double dwell = 300e-9 / 16.7e-9;
    for (double v : e) CHECK(v == doctest::Approx(100.0 * dwell).epsilon(1e-4));
}

TEST_CASE("run normalization") {
    RunSet set;
    Run flat_run;
    for (int i = 0; i < 100; ++i) {
        flat_run.position.push_back(i * 1e-6);
        flat_run.R1.push_back(100.0);
        flat_run.R2.push_back(25.0);
        flat_run.R3.push_back(50.0);
        flat_run.coincidences.push_back(7.0 + (i % 3));
    }
    set.runs = {flat_run};
    auto n = normalize_runs(set);
    CHECK(n[0].kappa2 == doctest::Approx(2.0));
    CHECK(n[0].kappa3 == doctest::Approx(1.0));
    for (double v : n[0].r_norm) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(n[0].run.coincidences == flat_run.coincidences);

    // 10% linear brightness drift on every channel
    Run drift = flat_run;
    std::vector<double> truth(100);
    for (int i = 0; i < 100; ++i) {
        const double g = 1.0 + 0.1 * i / 99.0;
        drift.R1[i] *= g;
        drift.R2[i] *= g;
        drift.R3[i] *= g;
        truth[i] = 50.0 + 10.0 * std::sin(i / 7.0);
        drift.coincidences[i] = truth[i] * g;
    }
    set.runs = {drift};
    n = normalize_runs(set);
    const auto& c = n[0].run.coincidences;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) worst = std::max(worst, std::abs(c[i] / truth[i] - c[0] / truth[0]));
    CHECK(worst < 0.01);

    Run dead = flat_run;
    std::fill(dead.R2.begin(), dead.R2.end(), 0.0);
    set.runs = {dead};
    CHECK_THROWS_AS(normalize_runs(set), std::invalid_argument);

    set.runs = {flat_run, drift};
    const auto avg = average_runs(normalize_runs(set), 0);
    CHECK(avg.size() == 100);
}

TEST_CASE("seed splitting") {
    CHECK(split_seed(1, 0) != split_seed(1, 1));
    CHECK(split_seed(1, 0) != split_seed(2, 0));
    CHECK(split_seed(123, 456) == split_seed(123, 456));
}
