#pragma once

#include "qoct/fit.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qoct {

// Two-interface amplitude model. Echo coefficients h1 = r1, h2 = t1^2 r2,
// h_k = (-r1 r2) h_{k-1}; phi0 = w0 tau_d is the carrier phase per gap round trip.
struct FeatureModel {
    double A = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double t1 = 1.0;
    double phi0 = 0.0;
    double d = 0.0;   // um, data axis
    double x1 = 0.0;  // um

    void validate() const;
};

// {V1, V12, V2 + V13, V23 + V14, V3 + V24 + V15}; dips positive.
std::array<double, 5> predict_amplitudes(const FeatureModel& m);
// Coefficient h_k for k = 1..5.
double echo_coefficient(const FeatureModel& m, int k);

// C - sum_j A_j exp(-(x - x1 - (j-1) d/2)^2 / (2 sigma^2)) + k x, x in um.
struct ReconFit {
    double C = 0.0;
    std::array<double, 5> A{};
    double sigma = 0.0;
    double x1 = 0.0;
    double d = 0.0;
    double k = 0.0;

    double evaluate(double x) const;
    std::array<double, 5> centers() const;
};

struct ReconFitOutcome {
    ReconFit fit;
    FitResult result;
};

struct ReconOptions {
    double threshold_sigmas = 3.0;  // peak-picking prominence in robust noise units
    // Fit only these amplitudes (others held at their initial values).
    std::array<bool, 5> fixed_amplitudes{false, false, false, false, false};
};

// Peak-picking plus a variable-projection grid search over (x1, d). Throws
// NumericalError("no features") when nothing clears the threshold. When only
// one feature is found the returned d is 0.
ReconFit initialize_reconstruction(std::span<const double> x_um, std::span<const double> y,
                                   const ReconOptions& options = {});

ReconFitOutcome fit_reconstruction(std::span<const double> x_um, std::span<const double> y, const ReconFit& init,
                                   const ReconOptions& options = {}, std::span<const double> sqrt_weights = {});

struct PhysicalOptions {
    bool free_t1 = false;  // otherwise t1 = sqrt(1 - r1^2)
    int phase_starts = 24;
};

struct PhysicalApprox {
    FeatureModel model;
    std::array<double, 5> predicted{};
    std::array<double, 5> residual{};  // predicted - measured
    double residual_norm = 0.0;
    bool degenerate = false;  // all-zero input
    FitResult fit;
};

// Least squares over (A, r1, r2, [t1,] phi0). Gauge: r1, r2, t1 >= 0 and
// phi0 in [0, pi] (the amplitudes are invariant under r2 -> -r2 with
// phi0 -> phi0 + pi, and under phi0 -> -phi0).
PhysicalApprox approximate_physical(const std::array<double, 5>& amplitudes, const PhysicalOptions& options = {});

struct GapEstimate {
    double d = 0.0;
    double uncertainty = 0.0;
};
GapEstimate extract_gap(const ReconFit& recon, const FitResult& fit);

struct ReconstructionResult {
    ReconFit initial;
    ReconFitOutcome free_fit;
    PhysicalApprox physical;
    std::optional<ReconFitOutcome> refit;  // amplitudes fixed to the physical prediction
    GapEstimate gap;
    bool gap_identifiable = true;
    std::string message;
};

// Full chain: initialise, fit, approximate the physical model, refit with
// frozen amplitudes, extract the gap.
ReconstructionResult reconstruct(std::span<const double> x_um, std::span<const double> y,
                                 const ReconOptions& options = {}, std::span<const double> sqrt_weights = {});

}  // namespace qoct
