#include "qoct/spectra.hpp"

#include "qoct/error.hpp"
#include "qoct/fit.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qoct {

void GaussianSpectrum::validate() const {
    if (!(std > 0.0) || !std::isfinite(std)) throw std::invalid_argument("GaussianSpectrum: std must be > 0");
    if (!std::isfinite(center)) throw std::invalid_argument("GaussianSpectrum: non-finite center");
}

double SpdcSource::delta_plus() const {
    return std::hypot(phasematch_std, pump_std);
}

std::string SpdcSource::validate() const {
    if (!(pump_std > 0.0)) throw std::invalid_argument("SpdcSource: pump_std must be > 0");
    if (!(phasematch_std > 0.0)) throw std::invalid_argument("SpdcSource: phasematch_std must be > 0");
    if (!(pump_center > 0.0)) throw std::invalid_argument("SpdcSource: pump_center must be > 0");
    if (pump_std > phasematch_std / 10.0)
        return "pump bandwidth is not small compared to the phase-matching bandwidth";
    return {};
}

double gaussian_pdf(double omega, double center, double std) {
    const double z = (omega - center) / std;
    return std::exp(-0.5 * z * z) / (std::sqrt(units::two_pi) * std);
}

double gaussian_pdf(double omega, const GaussianSpectrum& g) {
    return gaussian_pdf(omega, g.center, g.std);
}

double joint_density(double ws, double wi, const SpdcSource& src) {
    return 2.0 * gaussian_pdf(ws - wi, 0.0, src.phasematch_std) *
           gaussian_pdf(ws + wi, src.pump_center, src.pump_std);
}

GaussianSpectrum marginal(const SpdcSource& src) {
    return {0.5 * src.pump_center, 0.5 * src.delta_plus()};
}

double TabulatedSpectrum::evaluate(double w) const {
    if (omega.empty() || w < omega.front() || w > omega.back()) return 0.0;
    auto it = std::upper_bound(omega.begin(), omega.end(), w);
    if (it == omega.end()) return density.back();
    const auto i = static_cast<std::size_t>(it - omega.begin());
    const double t = (w - omega[i - 1]) / (omega[i] - omega[i - 1]);
    return density[i - 1] + t * (density[i] - density[i - 1]);
}

double TabulatedSpectrum::integral() const {
    double s = 0.0;
    for (std::size_t i = 1; i < omega.size(); ++i)
        s += 0.5 * (density[i] + density[i - 1]) * (omega[i] - omega[i - 1]);
    return s;
}

TabulatedSpectrum load_tabulated(std::vector<std::pair<double, double>> rows) {
    if (rows.size() < 8) throw ConfigError("tabulated spectrum needs at least 8 rows, got " + std::to_string(rows.size()));
    TabulatedSpectrum t;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [w, d] = rows[i];
        if (!std::isfinite(w) || !std::isfinite(d))
            throw ConfigError("tabulated spectrum row " + std::to_string(i) + ": non-finite value");
        if (d < 0.0) throw ConfigError("tabulated spectrum row " + std::to_string(i) + ": negative density");
        if (i > 0 && !(w > rows[i - 1].first))
            throw ConfigError("tabulated spectrum row " + std::to_string(i) + ": frequencies must be strictly increasing");
        t.omega.push_back(w);
        t.density.push_back(d);
    }
    return t;
}

GaussianSpectrumFit fit_gaussian(const TabulatedSpectrum& spec, std::span<const double> sqrt_weights) {
    if (spec.omega.size() < 8) throw ConfigError("fit_gaussian: need at least 8 rows");
    const auto [mn, mx] = std::minmax_element(spec.density.begin(), spec.density.end());
    if (*mx - *mn <= 0.0) throw ConfigError("fit_gaussian: degenerate (constant) densities");

    // Moment estimates as the starting point.
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 1; i < spec.omega.size(); ++i) {
        const double dw = spec.omega[i] - spec.omega[i - 1];
        const double w = 0.5 * (spec.omega[i] + spec.omega[i - 1]);
        const double d = 0.5 * (spec.density[i] + spec.density[i - 1]) - *mn;
        m0 += d * dw;
        m1 += d * w * dw;
        m2 += d * w * w * dw;
    }
    const double c0 = m1 / m0;
    const double s0 = std::sqrt(std::max(m2 / m0 - c0 * c0, 1e-30));
    const double scale = *mx;

    // Fit in units of the starting center/width and of the peak so the
    // parameters are O(1).
    std::vector<double> x(spec.omega.size()), y(spec.omega.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = (spec.omega[i] - c0) / s0;
        y[i] = spec.density[i] / scale;
    }
    const double a0 = m0 / (scale * s0);
    auto prob = curve_problem(
        [](double t, std::span<const double> p) { return p[0] * gaussian_pdf(t, p[1], std::abs(p[2])); }, x, y,
        {a0, 0.0, 1.0}, {"amplitude", "center", "std"}, sqrt_weights);
    LeastSquaresOptions opt;
    opt.max_iterations = 500;
    const FitResult fr = damped_least_squares(prob, opt);
    if (!fr.converged) throw NumericalError("fit_gaussian: " + fr.message);
    GaussianSpectrumFit out;
    out.amplitude = scale * s0 * fr.values[0];
    out.spectrum = {c0 + s0 * fr.values[1], s0 * std::abs(fr.values[2])};
    out.residual_norm = fr.residual_norm * scale;
    return out;
}

}  // namespace qoct
