#pragma once

#include "qoct/interferometer.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace qoct {

struct StepScan {
    double step = 70e-9;    // m of mirror travel
    double exposure = 0.1;  // s per step
};

struct ContinuousScan {
    double velocity = 16.7e-9;  // m/s
    double bin_width = 300e-9;  // m

    double dwell() const { return bin_width / velocity; }
};

// Span is given as optical delays; positions on the mirror axis follow from
// x = c tau / 2.
struct ScanPlan {
    std::variant<StepScan, ContinuousScan> mode = StepScan{};
    double tau_start = 0.0;
    double tau_end = 0.0;

    void validate() const;
    // Step positions, or bin centres for a continuous scan (delays, s).
    std::vector<double> sample_delays() const;
    std::vector<double> exposures() const;
    // Delay width each continuous bin integrates over; 0 for step scans.
    double bin_delay_width() const;
};

struct NoiseModel {
    double path_jitter_std = 0.0;     // m, rms optical-path error
    double jitter_correlation = 0.0;  // m of optical path; 0 = independent per point
    double pair_rate = 0.0;           // pairs/s
    std::array<double, 3> efficiency{1.0, 1.0, 1.0};  // D1, D2, D3
    std::array<double, 3> dark_rate{0.0, 0.0, 0.0};   // counts/s
    double coincidence_window = 1e-9;                 // s
    std::uint64_t seed = 1;

    void validate() const;
};

// Independent per-index stream: splitmix64 of (seed, index).
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

// Carrier phase noise. jitter_std and correlation are optical path lengths
// (m); delay_step and the returned errors are delays (s). Each point draws
// eps with std jitter_std / c, optionally correlated along the grid with a
// Gaussian kernel of width correlation / c. M1 gains w0 eps and M2 gains
// wp eps in their arguments.
std::vector<double> draw_jitter(std::size_t n, double delay_step, double jitter_std, double correlation,
                                std::uint64_t seed);
InterferogramTerms apply_phase_jitter(const InterferogramTerms& terms, double jitter_std, std::uint64_t seed,
                                      double correlation = 0.0);
SinglePhotonTerms apply_phase_jitter(const SinglePhotonTerms& terms, double jitter_std, std::uint64_t seed,
                                     double correlation = 0.0);
// Same with an explicit delay error per point (s).
InterferogramTerms apply_phase_jitter(const InterferogramTerms& terms, std::span<const double> eps);
SinglePhotonTerms apply_phase_jitter(const SinglePhotonTerms& terms, std::span<const double> eps);
// Expected value over jitter much faster than the dwell time: carrier
// envelopes damped by exp(-w^2 s^2 / 2).
InterferogramTerms average_phase_jitter(const InterferogramTerms& terms, double jitter_std);
SinglePhotonTerms average_phase_jitter(const SinglePhotonTerms& terms, double jitter_std);

struct RateTrace {
    std::vector<double> tau;
    std::vector<double> rate;  // counts/s
    std::string channel;
    double averaging_width = 0.0;  // s, box average already applied to the rates
};

struct SinglesRates {
    double R1 = 0.0, R2 = 0.0, R3 = 0.0;
};

// Coincidence rates. cross: pair_rate P_ab eta1 (eta2 + eta3)/2, auto:
// pair_rate P_bb eta2 eta3 / 2 (the output splitter sends the two photons to
// different detectors half the time). Accidentals: window x product of the
// singles of the detector pairs; `singles` defaults to the dark rates.
RateTrace detection_rates(const Interferogram& ifg, Scheme scheme, const NoiseModel& noise,
                          const SinglesRates* singles = nullptr);

// Singles from the single-photon interferograms of ports a and b. Two photons
// per pair: R1 = pair_rate 2 M^(a) eta1 + dark1, R2,3 = pair_rate 2 M^(b) eta/2 + dark.
std::array<RateTrace, 3> singles_rates(const Interferogram& port_a, const Interferogram& port_b,
                                       const NoiseModel& noise);

struct MeasuredTrace {
    std::vector<double> tau;         // s, point or bin centre
    std::vector<double> position;    // m, mirror axis
    std::vector<double> counts;      // integer valued
    std::vector<double> exposure;    // s
    std::string channel;
};

// Poisson counts. Step: rate interpolated at each step. Continuous: mean rate
// over each bin (taken directly when the rates are already box-averaged over
// the bin width, otherwise integrated from the piecewise-linear rate) times
// the dwell time.
MeasuredTrace simulate_scan(const RateTrace& rates, const ScanPlan& plan, std::uint64_t seed);
std::vector<double> expected_counts(const RateTrace& rates, const ScanPlan& plan);

struct Run {
    std::vector<double> position;
    std::vector<double> R1, R2, R3;
    std::vector<double> coincidences;
};

struct RunSet {
    std::vector<Run> runs;
    void validate() const;
};

struct NormalizedRun {
    Run run;
    double kappa2 = 0.0, kappa3 = 0.0;
    std::vector<double> r_norm;
};

std::vector<NormalizedRun> normalize_runs(const RunSet& runs);

// Pointwise mean over runs of one channel (0 = coincidences, 1..3 = R1..R3).
std::vector<double> average_runs(const std::vector<NormalizedRun>& runs, int channel = 0);

}  // namespace qoct
