#include "qoct/acquisition.hpp"

#include "qoct/error.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace qoct {

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void ScanPlan::validate() const {
    if (!(tau_end > tau_start)) throw std::invalid_argument("ScanPlan: empty span");
    if (const auto* s = std::get_if<StepScan>(&mode)) {
        if (!(s->step > 0.0)) throw std::invalid_argument("ScanPlan: step must be > 0");
        if (!(s->exposure > 0.0)) throw std::invalid_argument("ScanPlan: exposure must be > 0");
    } else {
        const auto& c = std::get<ContinuousScan>(mode);
        if (!(c.velocity > 0.0) || !(c.bin_width > 0.0))
            throw std::invalid_argument("ScanPlan: velocity and bin_width must be > 0");
    }
}

std::vector<double> ScanPlan::sample_delays() const {
    validate();
    const double span = units::delay_to_mirror(tau_end - tau_start);
    std::vector<double> out;
    if (const auto* s = std::get_if<StepScan>(&mode)) {
        const auto n = static_cast<std::size_t>(std::floor(span / s->step + 1e-9)) + 1;
        for (std::size_t k = 0; k < n; ++k) out.push_back(tau_start + units::mirror_to_delay(k * s->step));
    } else {
        const auto& c = std::get<ContinuousScan>(mode);
        const auto n = static_cast<std::size_t>(std::floor(span / c.bin_width + 1e-9));
        if (n == 0) throw std::invalid_argument("ScanPlan: span shorter than one bin");
        for (std::size_t k = 0; k < n; ++k)
            out.push_back(tau_start + units::mirror_to_delay((k + 0.5) * c.bin_width));
    }
    return out;
}

std::vector<double> ScanPlan::exposures() const {
    const std::size_t n = sample_delays().size();
    if (const auto* s = std::get_if<StepScan>(&mode)) return std::vector<double>(n, s->exposure);
    return std::vector<double>(n, std::get<ContinuousScan>(mode).dwell());
}

double ScanPlan::bin_delay_width() const {
    if (const auto* c = std::get_if<ContinuousScan>(&mode)) return units::mirror_to_delay(c->bin_width);
    return 0.0;
}

void NoiseModel::validate() const {
    if (!(path_jitter_std >= 0.0) || !(jitter_correlation >= 0.0))
        throw std::invalid_argument("NoiseModel: jitter parameters must be >= 0");
    if (!(pair_rate >= 0.0)) throw std::invalid_argument("NoiseModel: pair_rate must be >= 0");
    for (int i = 0; i < 3; ++i) {
        if (!(efficiency[i] >= 0.0 && efficiency[i] <= 1.0))
            throw std::invalid_argument("NoiseModel: efficiencies must be in [0, 1]");
        if (!(dark_rate[i] >= 0.0)) throw std::invalid_argument("NoiseModel: dark rates must be >= 0");
    }
    if (!(coincidence_window >= 0.0)) throw std::invalid_argument("NoiseModel: coincidence window must be >= 0");
}

std::vector<double> draw_jitter(std::size_t n, double delay_step, double jitter_std, double correlation,
                                std::uint64_t seed) {
    if (!(jitter_std >= 0.0)) throw std::invalid_argument("phase jitter: std must be >= 0");
    std::vector<double> eps(n, 0.0);
    if (jitter_std == 0.0 || n == 0) return eps;
    const double s = jitter_std / units::c;
    // Counter-based standard normal (Box-Muller on two splitmix draws), so
    // each grid index has its own stream without seeding a generator.
    auto white = [seed](std::int64_t i) {
        const auto k = static_cast<std::uint64_t>(i) ^ 0x6a09e667f3bcc909ULL;
        const double u1 = (static_cast<double>(split_seed(seed, 2 * k) >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(split_seed(seed, 2 * k + 1) >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(units::two_pi * u2);
    };
    if (correlation == 0.0) {
        for (std::size_t i = 0; i < n; ++i) eps[i] = s * white(static_cast<std::int64_t>(i));
        return eps;
    }
    if (!(delay_step > 0.0)) throw std::invalid_argument("phase jitter: correlated noise needs a delay step");
    const double L = correlation / units::c / delay_step;  // kernel std in samples
    const auto half = static_cast<std::int64_t>(std::ceil(4.0 * L));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    double norm = 0.0;
    for (std::int64_t j = -half; j <= half; ++j) {
        const double v = std::exp(-0.5 * (j / L) * (j / L));
        k[static_cast<std::size_t>(j + half)] = v;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    const auto ni = static_cast<std::int64_t>(n);
    std::vector<double> w(static_cast<std::size_t>(ni + 2 * half));
    for (std::int64_t i = 0; i < ni + 2 * half; ++i) w[static_cast<std::size_t>(i)] = white(i - half);
    for (std::int64_t i = 0; i < ni; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j <= 2 * half; ++j)
            acc += k[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(i + j)];
        eps[static_cast<std::size_t>(i)] = s * acc / norm;
    }
    return eps;
}

static double mean_step(const std::vector<double>& tau) {
    return tau.size() > 1 ? (tau.back() - tau.front()) / static_cast<double>(tau.size() - 1) : 0.0;
}

InterferogramTerms apply_phase_jitter(const InterferogramTerms& terms, double jitter_std, std::uint64_t seed,
                                      double correlation) {
    if (jitter_std == 0.0) return terms;
    return apply_phase_jitter(terms, draw_jitter(terms.tau.size(), mean_step(terms.tau), jitter_std, correlation, seed));
}

SinglePhotonTerms apply_phase_jitter(const SinglePhotonTerms& terms, double jitter_std, std::uint64_t seed,
                                     double correlation) {
    if (jitter_std == 0.0) return terms;
    return apply_phase_jitter(terms, draw_jitter(terms.tau.size(), mean_step(terms.tau), jitter_std, correlation, seed));
}

InterferogramTerms apply_phase_jitter(const InterferogramTerms& terms, std::span<const double> eps) {
    InterferogramTerms t = terms;
    if (eps.size() != t.tau.size()) throw std::invalid_argument("apply_phase_jitter: jitter/grid size mismatch");
    for (std::size_t i = 0; i < t.tau.size(); ++i) {
        t.Z1[i] *= std::polar(1.0, -t.omega0 * eps[i]);
        t.Z2[i] *= std::polar(1.0, -2.0 * t.omega0 * eps[i]);
    }
    t.refresh_carriers();
    return t;
}

SinglePhotonTerms apply_phase_jitter(const SinglePhotonTerms& terms, std::span<const double> eps) {
    SinglePhotonTerms t = terms;
    if (eps.size() != t.tau.size()) throw std::invalid_argument("apply_phase_jitter: jitter/grid size mismatch");
    for (std::size_t i = 0; i < t.tau.size(); ++i) t.Z[i] *= std::polar(1.0, -t.carrier * eps[i]);
    return t;
}

InterferogramTerms average_phase_jitter(const InterferogramTerms& terms, double jitter_std) {
    InterferogramTerms t = terms;
    const double s = jitter_std / units::c;
    const double d1 = std::exp(-0.5 * std::pow(t.omega0 * s, 2));
    const double d2 = std::exp(-0.5 * std::pow(2.0 * t.omega0 * s, 2));
    for (auto& z : t.Z1) z *= d1;
    for (auto& z : t.Z2) z *= d2;
    t.refresh_carriers();
    return t;
}

SinglePhotonTerms average_phase_jitter(const SinglePhotonTerms& terms, double jitter_std) {
    SinglePhotonTerms t = terms;
    const double d = std::exp(-0.5 * std::pow(t.carrier * jitter_std / units::c, 2));
    for (auto& z : t.Z) z *= d;
    return t;
}

RateTrace detection_rates(const Interferogram& ifg, Scheme scheme, const NoiseModel& noise,
                          const SinglesRates* singles) {
    noise.validate();
    if (ifg.kind != kind_of(scheme))
        throw std::invalid_argument("detection_rates: interferogram kind '" + to_string(ifg.kind) +
                                    "' does not match scheme '" + to_string(scheme) + "'");
    const auto& e = noise.efficiency;
    const SinglesRates s = singles ? *singles : SinglesRates{noise.dark_rate[0], noise.dark_rate[1], noise.dark_rate[2]};
    double factor, accidental;
    if (scheme == Scheme::crosscorrelation) {
        factor = e[0] * (e[1] + e[2]) / 2.0;
        accidental = noise.coincidence_window * s.R1 * (s.R2 + s.R3);
    } else {
        factor = e[1] * e[2] / 2.0;
        accidental = noise.coincidence_window * s.R2 * s.R3;
    }
    RateTrace out;
    out.tau = ifg.tau;
    out.channel = to_string(scheme);
    out.rate.resize(ifg.values.size());
    for (std::size_t i = 0; i < ifg.values.size(); ++i)
        out.rate[i] = noise.pair_rate * ifg.values[i] * factor + accidental;
    out.averaging_width = ifg.box_average;
    return out;
}

std::array<RateTrace, 3> singles_rates(const Interferogram& a, const Interferogram& b, const NoiseModel& noise) {
    noise.validate();
    if (a.kind != Kind::single || b.kind != Kind::single)
        throw std::invalid_argument("singles_rates: needs single-photon interferograms");
    if (a.tau != b.tau) throw std::invalid_argument("singles_rates: port grids differ");
    std::array<RateTrace, 3> out;
    const char* names[3] = {"R1", "R2", "R3"};
    for (int d = 0; d < 3; ++d) {
        out[d].tau = a.tau;
        out[d].channel = names[d];
        out[d].rate.resize(a.tau.size());
        for (std::size_t i = 0; i < a.tau.size(); ++i) {
            const double photons = d == 0 ? 2.0 * a.values[i] : b.values[i];  // port b split in two
            out[d].rate[i] = noise.pair_rate * photons * noise.efficiency[d] + noise.dark_rate[d];
        }
    }
    for (auto& r : out) r.averaging_width = a.box_average;
    return out;
}

namespace {

double interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
    auto it = std::lower_bound(x.begin(), x.end(), t);
    if (it == x.begin()) return y.front();
    if (it == x.end()) return y.back();
    const auto i = static_cast<std::size_t>(it - x.begin());
    const double f = (t - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + f * (y[i] - y[i - 1]);
}

// Integral of the piecewise-linear interpolant over [a, b].
double integrate(const std::vector<double>& x, const std::vector<double>& y, double a, double b) {
    double s = 0.0;
    double prev_x = a, prev_y = interp(x, y, a);
    for (auto it = std::upper_bound(x.begin(), x.end(), a); it != x.end() && *it < b; ++it) {
        const auto i = static_cast<std::size_t>(it - x.begin());
        s += 0.5 * (prev_y + y[i]) * (x[i] - prev_x);
        prev_x = x[i];
        prev_y = y[i];
    }
    s += 0.5 * (prev_y + interp(x, y, b)) * (b - prev_x);
    return s;
}

}  // namespace

std::vector<double> expected_counts(const RateTrace& rates, const ScanPlan& plan) {
    plan.validate();
    if (rates.tau.size() != rates.rate.size() || rates.tau.empty())
        throw std::invalid_argument("simulate_scan: malformed rate trace");
    const auto delays = plan.sample_delays();
    const auto expo = plan.exposures();
    const double bw = plan.bin_delay_width();
    const double tol = 1e-9 * std::max(std::abs(rates.tau.front()), std::abs(rates.tau.back())) + 1e-21;
    const bool pre_averaged = bw > 0.0 && std::abs(rates.averaging_width - bw) <= 1e-9 * bw;
    // Pre-averaged rates are sampled at the bin centres; otherwise the whole bin must be covered.
    const double half = pre_averaged ? 0.0 : bw / 2.0;
    const double lo = delays.front() - half, hi = delays.back() + half;
    if (lo < rates.tau.front() - tol || hi > rates.tau.back() + tol)
        throw std::invalid_argument("simulate_scan: scan span lies outside the rate grid");
    std::vector<double> mean(delays.size());
    for (std::size_t i = 0; i < delays.size(); ++i) {
        double r;
        if (bw == 0.0 || pre_averaged) {
            r = interp(rates.tau, rates.rate, delays[i]);
        } else {
            r = integrate(rates.tau, rates.rate, delays[i] - bw / 2.0, delays[i] + bw / 2.0) / bw;
        }
        mean[i] = std::max(r, 0.0) * expo[i];
    }
    return mean;
}

MeasuredTrace simulate_scan(const RateTrace& rates, const ScanPlan& plan, std::uint64_t seed) {
    const auto mean = expected_counts(rates, plan);
    MeasuredTrace out;
    out.tau = plan.sample_delays();
    out.exposure = plan.exposures();
    out.channel = rates.channel;
    out.position.resize(out.tau.size());
    out.counts.resize(out.tau.size());
    for (std::size_t i = 0; i < out.tau.size(); ++i) {
        out.position[i] = units::delay_to_mirror(out.tau[i]);
        if (mean[i] <= 0.0) {
            out.counts[i] = 0.0;
            continue;
        }
        std::mt19937_64 g(split_seed(seed, i));
        out.counts[i] = static_cast<double>(std::poisson_distribution<long long>(mean[i])(g));
    }
    return out;
}

void RunSet::validate() const {
    if (runs.empty()) throw std::invalid_argument("RunSet: no runs");
    const auto& p = runs.front().position;
    for (const auto& r : runs) {
        if (r.position != p) throw std::invalid_argument("RunSet: runs do not share a grid");
        if (r.R1.size() != p.size() || r.R2.size() != p.size() || r.R3.size() != p.size() ||
            r.coincidences.size() != p.size())
            throw std::invalid_argument("RunSet: channel length mismatch");
    }
}

static double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<NormalizedRun> normalize_runs(const RunSet& set) {
    set.validate();
    std::vector<NormalizedRun> out;
    for (const auto& run : set.runs) {
        const double m1 = mean_of(run.R1), m2 = mean_of(run.R2), m3 = mean_of(run.R3);
        if (!(m1 > 0.0) || !(m2 > 0.0) || !(m3 > 0.0))
            throw std::invalid_argument("normalize_runs: zero-mean detector channel");
        NormalizedRun n;
        n.kappa2 = m1 / (2.0 * m2);
        n.kappa3 = m1 / (2.0 * m3);
        const std::size_t len = run.position.size();
        n.r_norm.resize(len);
        for (std::size_t i = 0; i < len; ++i) n.r_norm[i] = run.R1[i] + n.kappa2 * run.R2[i] + n.kappa3 * run.R3[i];
        const double mn = mean_of(n.r_norm);
        for (double& v : n.r_norm) v /= mn;
        n.run = run;
        for (std::size_t i = 0; i < len; ++i) {
            n.run.R1[i] /= n.r_norm[i];
            n.run.R2[i] /= n.r_norm[i];
            n.run.R3[i] /= n.r_norm[i];
            n.run.coincidences[i] /= n.r_norm[i];
        }
        out.push_back(std::move(n));
    }
    return out;
}

std::vector<double> average_runs(const std::vector<NormalizedRun>& runs, int channel) {
    if (runs.empty()) throw std::invalid_argument("average_runs: no runs");
    const std::size_t len = runs.front().run.position.size();
    std::vector<double> avg(len, 0.0);
    for (const auto& r : runs) {
        const std::vector<double>* v = channel == 0 ? &r.run.coincidences
                                       : channel == 1 ? &r.run.R1
                                       : channel == 2 ? &r.run.R2
                                                      : &r.run.R3;
        for (std::size_t i = 0; i < len; ++i) avg[i] += (*v)[i];
    }
    for (double& v : avg) v /= static_cast<double>(runs.size());
    return avg;
}

}  // namespace qoct
