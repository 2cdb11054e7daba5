#pragma once

#include "qoct/acquisition.hpp"
#include "qoct/interferometer.hpp"
#include "qoct/sample.hpp"
#include "qoct/spectra.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qoct {

enum class JitterMode {
    per_point,  // one draw per acquisition point (step scans)
    averaged,   // expected value over jitter faster than the dwell time
};

struct NoiseConfig {
    NoiseModel model;
    int runs = 1;
    JitterMode jitter = JitterMode::per_point;
};

struct AnalysisConfig {
    double cutoff = 0.015;  // units of omega_p
    std::optional<double> sigma1;  // fix the M1 spectral width (units of omega_p)
    double fit_lo = 0.2, fit_hi = 1.4;
    double savgol_window_um = 17.0;
    int savgol_order = 3;
    double threshold_sigmas = 3.0;
};

struct Scenario {
    std::string origin;  // file the scenario was read from
    std::string name;
    std::uint64_t seed = 1;
    std::string output = "out";
    SpdcSource source;
    std::string bandwidth_kind;  // how the phase-matching width was given
    std::optional<std::string> spectrum_file;  // resolved path
    Sample sample = SingleLayer{};
    std::vector<Kind> kinds{Kind::single, Kind::autocorrelation, Kind::crosscorrelation};
    ScanPlan plan;
    NoiseConfig noise;
    AnalysisConfig analysis;
};

// Numeric keys carry a unit suffix (_nm, _um, _mm, _m, _thz, _ghz, _hz, _s,
// _ms, _ns, _cps, _wp, _nm_s); only a few dimensionless keys are exempt.
// Unknown keys, missing suffixes and bad values are ConfigErrors anchored
// at "origin:line".
Scenario parse_scenario(const std::string& text, const std::string& origin,
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
// Bundled preset by name ("defectoscopy") or path.
std::filesystem::path preset_path(const std::string& name);

// Phase-matching std Delta from a single-photon wavelength width around
// 2 lambda_p, given as "fwhm" or "std". The marginal std is Delta_plus / 2.
double phasematch_from_bandwidth(double pump_wavelength, double pump_std, double width, const std::string& kind);

struct Simulation {
    std::vector<double> tau;       // acquisition delays (s)
    std::vector<double> position;  // mirror axis (m)
    std::map<Kind, Interferogram> ideal;  // jitter- and noise-free, per pair
    // runs[k] holds the channels "R1", "R2", "R3", then "auto" / "cross" for
    // the requested schemes.
    std::vector<std::vector<MeasuredTrace>> runs;
};

// Deterministic in (scenario, seed). Run k uses split_seed(seed, k).
Simulation simulate(const Scenario& s, std::uint64_t seed, const QuadratureGrid& grid = {});

// Counts of one channel, normalised per run by the singles brightness and
// averaged over runs; plain average when the runs carry no singles.
std::vector<double> averaged_channel(const Simulation& sim, const std::string& channel);

}  // namespace qoct
