#include "qoct/dsp.hpp"
#include "qoct/error.hpp"
#include "qoct/io.hpp"
#include "qoct/material.hpp"
#include "qoct/reconstruct.hpp"
#include "qoct/scenario.hpp"
#include "qoct/units.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

using namespace qoct;
using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string preset;
    std::string scenario_file;  // positional, per subcommand
};

std::optional<Scenario> scenario_of(const Globals& g) {
    if (!g.scenario_file.empty()) return load_scenario(g.scenario_file);
    if (!g.preset.empty()) return load_scenario(preset_path(g.preset));
    return std::nullopt;
}

Scenario require_scenario(const Globals& g, const char* cmd) {
    auto s = scenario_of(g);
    if (!s) throw ConfigError(std::string(cmd) + ": needs a scenario file or --preset");
    return *s;
}

std::uint64_t seed_of(const Globals& g, const std::optional<Scenario>& s) {
    return g.seed ? *g.seed : (s ? s->seed : 1);
}

std::string out_of(const Globals& g, const std::optional<Scenario>& s, const char* fallback) {
    if (!g.out.empty()) return g.out;
    return s ? s->output : fallback;
}

json scenario_meta(const std::optional<Scenario>& s, std::uint64_t seed) {
    json j = {{"seed", seed}};
    if (s) {
        j["scenario"] = s->origin;
        j["name"] = s->name;
    }
    return j;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Globals& g) {
    const Scenario s = require_scenario(g, "simulate");
    const auto seed = seed_of(g, s);
    io::OutputDir out(out_of(g, s, "out"));
    const Simulation sim = simulate(s, seed);

    json plots = json::array();
    for (const auto& [kind, ifg] : sim.ideal) {
        const std::string name = "ideal_" + to_string(kind) + ".csv";
        out.write(name, io::interferogram_csv(ifg));
        plots.push_back(io::plot_spec("ideal " + to_string(kind), name, "delay_um", "value"));
    }
    for (std::size_t k = 0; k < sim.runs.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "runs/run_%03zu.csv", k);
        out.write(name, io::measured_csv(sim.runs[k]));
        if (k == 0)
            for (const auto& c : sim.runs[k])
                plots.push_back(io::plot_spec("measured " + c.channel, name, "position_um", "counts", "channel",
                                              c.channel));
    }
    // Run-averaged coincidence channels.
    std::string avg = "position_um,value,channel\n";
    for (const auto& c : sim.runs.front()) {
        if (c.channel.rfind('R', 0) == 0) continue;
        const auto v = averaged_channel(sim, c.channel);
        for (std::size_t i = 0; i < v.size(); ++i)
            avg += io::fmt(sim.position[i] / units::um) + "," + io::fmt(v[i]) + "," + c.channel + "\n";
    }
    out.write("averaged.csv", avg);
    out.write_json("plots.json", plots);
    json meta = scenario_meta(s, seed);
    meta["command"] = "simulate";
    meta["runs"] = sim.runs.size();
    out.finish(meta);
    std::cout << "simulate: " << sim.tau.size() << " points, " << sim.runs.size() << " run(s) -> "
              << out.root().string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- analyze

struct Trace {
    std::string channel;
    Kind kind = Kind::single;
    std::vector<double> tau, values;      // mean over files
    std::vector<std::vector<double>> runs;  // one entry per file
};

Kind kind_of_channel(const std::string& ch) {
    if (ch == "auto") return Kind::autocorrelation;
    if (ch == "cross") return Kind::crosscorrelation;
    return Kind::single;
}

// Measured or ideal CSVs; measured channels are converted to rates. Each
// file is one run.
std::vector<Trace> load_traces(const std::vector<std::string>& files) {
    std::map<std::string, Trace> acc;
    auto add = [&](const std::string& f, const std::string& ch, Kind kind, const std::vector<double>& tau,
                   std::vector<double> v) {
        auto& t = acc[ch];
        if (t.tau.empty()) {
            t.channel = ch;
            t.kind = kind;
            t.tau = tau;
        } else if (t.tau.size() != tau.size()) {
            throw ConfigError(f + ": channel '" + ch + "' has a different grid");
        }
        t.runs.push_back(std::move(v));
    };
    for (const auto& f : files) {
        const std::string text = io::read_file(f);
        if (text.rfind("tau_s", 0) == 0) {
            const auto ifg = io::parse_interferogram_csv(text, f);
            add(f, to_string(ifg.kind), ifg.kind, ifg.tau, ifg.values);
        } else {
            for (const auto& [ch, m] : io::parse_measured_csv(text, f)) {
                std::vector<double> rate(m.counts.size());
                for (std::size_t i = 0; i < m.counts.size(); ++i) {
                    if (!(m.exposure[i] > 0.0)) throw ConfigError(f + ": exposure must be > 0");
                    rate[i] = m.counts[i] / m.exposure[i];
                }
                add(f, ch, kind_of_channel(ch), m.tau, std::move(rate));
            }
        }
    }
    std::vector<Trace> out;
    for (auto& [ch, t] : acc) {
        if (t.tau.size() < 8) throw ConfigError("channel '" + ch + "' has fewer than 8 points");
        t.values.assign(t.tau.size(), 0.0);
        for (const auto& r : t.runs)
            for (std::size_t i = 0; i < r.size(); ++i) t.values[i] += r[i] / static_cast<double>(t.runs.size());
        out.push_back(std::move(t));
    }
    if (out.empty()) throw ConfigError("analyze: no traces");
    // Single-count channels first: their spectral width feeds the coincidence fits.
    std::stable_partition(out.begin(), out.end(), [](const Trace& t) { return t.kind == Kind::single; });
    return out;
}

json feature_json(const FeatureFit& f) {
    return {{"center_um", f.center},   {"center_error_um", f.center_error}, {"sigma_um", f.sigma},
            {"sigma_error_um", f.sigma_error}, {"fwhm_um", f.fwhm},         {"amplitude", f.amplitude},
            {"amplitude_error", f.amplitude_error}, {"offset", f.offset},   {"sign", f.sign},
            {"converged", f.fit.converged}};
}

int cmd_analyze(const Globals& g, const std::vector<std::string>& files, std::optional<double> pump_nm,
                std::optional<double> cutoff_override) {
    const auto s = scenario_of(g);
    if (files.empty()) throw ConfigError("analyze: no trace files given (--trace)");
    double omega_p;
    if (pump_nm)
        omega_p = units::wavelength_to_omega(*pump_nm * units::nm);
    else if (s)
        omega_p = s->source.pump_center;
    else
        throw ConfigError("analyze: pump frequency unknown (give --pump-nm or a scenario)");
    const AnalysisConfig a = s ? s->analysis : AnalysisConfig{};
    const double cutoff = cutoff_override ? *cutoff_override : a.cutoff;

    const auto traces = load_traces(files);
    io::OutputDir out(out_of(g, s, "analysis"));
    json report = scenario_meta(s, seed_of(g, s));
    report["command"] = "analyze";
    report["cutoff_wp"] = cutoff;
    json plots = json::array();
    bool all_converged = true;
    std::vector<double> single_sigmas;

    for (const auto& t : traces) {
        double step;
        try {
            step = uniform_step(t.tau);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("channel '" + t.channel + "': " + e.what());
        }
        const double nyquist = units::pi / step / omega_p;
        if (!(cutoff < nyquist))
            throw ConfigError("cutoff " + io::fmt(cutoff) + " wp is at or above the Nyquist frequency " +
                              io::fmt(nyquist) + " wp");
        std::vector<double> x_um(t.tau.size());
        for (std::size_t i = 0; i < t.tau.size(); ++i) x_um[i] = units::delay_to_mirror(t.tau[i]) / units::um;

        json ch;
        ch["runs"] = t.runs.size();
        const auto spec = mean_dft_magnitude(t.tau, t.runs, omega_p);
        out.write("spectrum_" + t.channel + ".csv", io::spectrum_csv(spec));
        plots.push_back(io::plot_spec("spectrum " + t.channel, "spectrum_" + t.channel + ".csv",
                                      "omega_over_omega_p", "magnitude"));

        if (t.kind == Kind::single) {
            // Envelope of one realisation; averaging runs with wandering
            // carrier phase would wash it out.
            const auto env = analytic_envelope(t.runs.front());
            const auto f = fit_gaussian_feature(x_um, env);
            ch["envelope_fit"] = feature_json(f);
            all_converged = all_converged && f.fit.converged;
            std::string csv = "position_um,envelope\n";
            for (std::size_t i = 0; i < env.size(); ++i) csv += io::fmt(x_um[i]) + "," + io::fmt(env[i]) + "\n";
            out.write("envelope_" + t.channel + ".csv", csv);

            const auto sp = fit_spectral_peak(spec);
            ch["spectral_fit"] = {{"center_wp", sp.center}, {"sigma_wp", sp.sigma},
                                  {"sigma_error_wp", sp.sigma_error}, {"amplitude", sp.amplitude},
                                  {"converged", sp.fit.converged}};
            single_sigmas.push_back(sp.sigma);
        } else {
            std::optional<double> s1 = a.sigma1;
            std::string s1_source = a.sigma1 ? "config" : "free";
            if (!s1 && !single_sigmas.empty()) {
                double m = 0.0;
                for (double v : single_sigmas) m += v / static_cast<double>(single_sigmas.size());
                s1 = m;
                s1_source = "single-count spectra";
            }
            const auto sf = fit_two_gaussian_spectrum(spec, s1, a.fit_lo, a.fit_hi);
            ch["spectral_fit"] = {{"c", sf.c},           {"a1", sf.a1},
                                  {"a2", sf.a2},         {"sigma1_wp", sf.sigma1},
                                  {"sigma2_wp", sf.sigma2}, {"sigma1_fixed", sf.sigma1_fixed},
                                  {"sigma1_source", s1_source},
                                  {"a1_error", sf.a1_error}, {"a2_error", sf.a2_error},
                                  {"sigma1_error_wp", sf.sigma1_error}, {"sigma2_error_wp", sf.sigma2_error},
                                  {"converged", sf.fit.converged}};
            all_converged = all_converged && sf.fit.converged;

            const auto hom = lowpass_extract(t.tau, t.values, omega_p, cutoff);
            std::string csv = "position_um,value\n";
            for (std::size_t i = 0; i < hom.size(); ++i) csv += io::fmt(x_um[i]) + "," + io::fmt(hom[i]) + "\n";
            out.write("extracted_" + t.channel + ".csv", csv);
            plots.push_back(
                io::plot_spec("extracted HOM " + t.channel, "extracted_" + t.channel + ".csv", "position_um", "value"));
            const auto f = fit_gaussian_feature(x_um, hom);
            ch["hom_fit"] = feature_json(f);
            all_converged = all_converged && f.fit.converged;
        }
        report["channels"][t.channel] = ch;
    }
    report["converged"] = all_converged;
    out.write_json("report.json", report);
    out.write_json("plots.json", plots);
    out.finish({{"command", "analyze"}});
    std::cout << "analyze: " << traces.size() << " channel(s) -> " << out.root().string() << "\n";
    if (!all_converged) {
        std::cerr << "analyze: a fit did not converge (see report.json)\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------- dispersion

int cmd_dispersion(const Globals& g, std::optional<std::string> material_name, std::optional<double> thickness_mm,
                   int sweep_points) {
    const auto s = scenario_of(g);
    SpdcSource src;
    if (s) {
        src = s->source;
    } else {
        // Defaults of the silicon example: 1313 nm degenerate pairs.
        src.pump_center = units::wavelength_to_omega(656.5 * units::nm);
        src.pump_std = units::hz_to_omega(6.9e9);
        src.phasematch_std = units::hz_to_omega(8.7e12);
    }
    const DispersiveSlab* slab = s ? std::get_if<DispersiveSlab>(&s->sample) : nullptr;
    const SellmeierMaterial mat =
        material_name ? MaterialLibrary::builtin().get(*material_name)
                      : (slab ? slab->material : MaterialLibrary::builtin().get("silicon"));
    const double L = thickness_mm ? *thickness_mm * units::mm : (slab ? slab->thickness : 5.0 * units::mm);
    const int passes = slab ? slab->passes : 2;
    if (!(L >= 0.0)) throw ConfigError("thickness must be >= 0");
    if (sweep_points < 2) throw ConfigError("sweep needs at least 2 points");

    auto report_json = [&](const DispersionReport& r) {
        return json{{"material", mat.name},
                    {"thickness_mm", L / units::mm},
                    {"passes", passes},
                    {"kappa_s2", r.kappa},
                    {"alpha0", r.alpha0},
                    {"alpha1", r.alpha1},
                    {"dn_domega_s", r.dn_domega},
                    {"index", r.index},
                    {"path_length_m", r.path_length},
                    {"phi2_exact_s2", r.phi2_exact},
                    {"alpha1_exact", r.alpha1_exact}};
    };
    const auto rep = broadening_factors(src, mat, L, passes);
    io::OutputDir out(out_of(g, s, "dispersion"));
    out.write_json("dispersion.json", report_json(rep));

    std::string csv = "thickness_mm,alpha0,alpha1,alpha1_exact\n";
    const double top = L > 0.0 ? 2.0 * L : 10.0 * units::mm;
    for (int i = 0; i < sweep_points; ++i) {
        const double th = top * i / (sweep_points - 1);
        const auto r = broadening_factors(src, mat, th, passes);
        csv += io::fmt(th / units::mm) + "," + io::fmt(r.alpha0) + "," + io::fmt(r.alpha1) + "," +
               io::fmt(r.alpha1_exact) + "\n";
    }
    out.write("sweep.csv", csv);
    out.write_json("plots.json", json::array({io::plot_spec("alpha1 vs thickness", "sweep.csv", "thickness_mm",
                                                            "alpha1")}));
    out.finish({{"command", "dispersion"}});
    std::cout << "dispersion: " << mat.name << " " << L / units::mm << " mm: alpha0 - 1 = " << rep.alpha0 - 1.0
              << ", alpha1 = " << rep.alpha1 << "\n";
    return 0;
}

// ---------------------------------------------------------------- reconstruct

json recon_fit_json(const ReconFit& f) {
    return {{"C", f.C}, {"A", f.A}, {"sigma_um", f.sigma}, {"x1_um", f.x1}, {"d_um", f.d}, {"k_per_um", f.k},
            {"centers_um", f.centers()}};
}

json reconstruction_json(const ReconstructionResult& r) {
    json j;
    j["initial"] = recon_fit_json(r.initial);
    j["free_fit"] = recon_fit_json(r.free_fit.fit);
    j["free_fit"]["fit"] = io::to_json(r.free_fit.result);
    const auto& m = r.physical.model;
    j["physical"] = {{"A", m.A},       {"r1", m.r1},   {"r2", m.r2},
                     {"t1", m.t1},     {"phi0", m.phi0}, {"predicted", r.physical.predicted},
                     {"residual", r.physical.residual}, {"residual_norm", r.physical.residual_norm},
                     {"degenerate", r.physical.degenerate}};
    if (r.refit) {
        j["refit"] = recon_fit_json(r.refit->fit);
        j["refit"]["fit"] = io::to_json(r.refit->result);
    }
    j["gap_um"] = r.gap.d;
    j["gap_uncertainty_um"] = r.gap.uncertainty;
    j["gap_identifiable"] = r.gap_identifiable;
    j["message"] = r.message;
    return j;
}

struct Series {
    std::vector<double> x_um, y;
};

Series series_from_scenario(const Scenario& s, std::uint64_t seed, const std::string& channel) {
    const Simulation sim = simulate(s, seed);
    Series out;
    for (double p : sim.position) out.x_um.push_back(p / units::um);
    out.y = averaged_channel(sim, channel);
    return out;
}

Series series_from_files(const std::vector<std::string>& files, const std::string& channel) {
    for (const auto& t : load_traces(files)) {
        if (t.channel != channel) continue;
        Series out;
        for (double tau : t.tau) out.x_um.push_back(units::delay_to_mirror(tau) / units::um);
        out.y = t.values;
        return out;
    }
    throw ConfigError("reconstruct: no channel '" + channel + "' in the trace files");
}

int cmd_reconstruct(const Globals& g, const std::vector<std::string>& files, const std::string& channel,
                    int sweep, int bins) {
    const auto s = scenario_of(g);
    if (files.empty() && !s) throw ConfigError("reconstruct: needs --trace files or a scenario");
    const auto seed = seed_of(g, s);
    ReconOptions opt;
    if (s) opt.threshold_sigmas = s->analysis.threshold_sigmas;

    io::OutputDir out(out_of(g, s, "reconstruct"));
    const Series data = files.empty() ? series_from_scenario(*s, seed, channel) : series_from_files(files, channel);
    const auto r = reconstruct(data.x_um, data.y, opt);
    json j = scenario_meta(s, seed);
    j["command"] = "reconstruct";
    j["result"] = reconstruction_json(r);

    std::string csv = "position_um,data,model\n";
    const ReconFit& shown = r.refit ? r.refit->fit : r.free_fit.fit;
    for (std::size_t i = 0; i < data.x_um.size(); ++i)
        csv += io::fmt(data.x_um[i]) + "," + io::fmt(data.y[i]) + "," + io::fmt(shown.evaluate(data.x_um[i])) + "\n";
    out.write("fit.csv", csv);
    json plots = json::array({io::plot_spec("data", "fit.csv", "position_um", "data"),
                              io::plot_spec("model", "fit.csv", "position_um", "model")});

    if (sweep > 0) {
        if (!s) throw ConfigError("reconstruct: --sweep needs a scenario");
        std::vector<double> d;
        for (int k = 0; k < sweep; ++k) {
            const Series sk = series_from_scenario(*s, seed + static_cast<std::uint64_t>(k), channel);
            d.push_back(reconstruct(sk.x_um, sk.y, opt).gap.d);
        }
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
        double var = 0.0;
        for (double v : d) var += (v - mean) * (v - mean);
        const double sd = d.size() > 1 ? std::sqrt(var / (d.size() - 1)) : 0.0;
        const auto [lo_it, hi_it] = std::minmax_element(d.begin(), d.end());
        const double lo = *lo_it, hi = *hi_it > *lo_it ? *hi_it : *lo_it + 1e-3;
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (double v : d) {
            auto b = static_cast<int>((v - lo) / (hi - lo) * bins);
            counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
        }
        std::string h = "bin_low_um,bin_high_um,count\n";
        for (int b = 0; b < bins; ++b)
            h += io::fmt(lo + (hi - lo) * b / bins) + "," + io::fmt(lo + (hi - lo) * (b + 1) / bins) + "," +
                 std::to_string(counts[static_cast<std::size_t>(b)]) + "\n";
        out.write("gap_histogram.csv", h);
        std::string raw = "seed,gap_um\n";
        for (std::size_t k = 0; k < d.size(); ++k) raw += std::to_string(seed + k) + "," + io::fmt(d[k]) + "\n";
        out.write("gap_sweep.csv", raw);
        j["sweep"] = {{"seeds", sweep}, {"mean_um", mean}, {"std_um", sd}};
        plots.push_back(io::plot_spec("gap histogram", "gap_histogram.csv", "bin_low_um", "count"));
    }
    out.write_json("reconstruction.json", j);
    out.write_json("plots.json", plots);
    out.finish({{"command", "reconstruct"}, {"seed", seed}});
    std::cout << "reconstruct: d = " << r.gap.d << " +/- " << r.gap.uncertainty << " um";
    if (!r.gap_identifiable) std::cout << " (not identifiable: " << r.message << ")";
    std::cout << "\n";
    return r.free_fit.result.converged ? 0 : 3;
}

// ---------------------------------------------------------------- spectrum-fit

int cmd_spectrum_fit(const Globals& g, std::optional<std::string> file) {
    const auto s = scenario_of(g);
    std::string path;
    if (file)
        path = *file;
    else if (s && s->spectrum_file)
        path = *s->spectrum_file;
    else
        throw ConfigError("spectrum-fit: needs --spectrum or a scenario with source.spectrum_file");
    const auto spec = io::parse_spectrum_csv(io::read_file(path), path);
    const auto f = fit_gaussian(spec);
    const double lambda = units::omega_to_wavelength(f.spectrum.center);
    // Small-band width conversion back to wavelength.
    const double std_nm = f.spectrum.std * lambda * lambda / (units::two_pi * units::c) / units::nm;
    json j = {{"file", path},
              {"center_rad_s", f.spectrum.center},
              {"std_rad_s", f.spectrum.std},
              {"center_nm", lambda / units::nm},
              {"std_nm", std_nm},
              {"fwhm_nm", std_nm * units::fwhm_per_sigma},
              {"amplitude", f.amplitude},
              {"residual_norm", f.residual_norm},
              // Marginal std = Delta_plus / 2; narrow pump assumed.
              {"phasematch_std_thz", 2.0 * f.spectrum.std / units::two_pi / 1e12}};
    io::OutputDir out(out_of(g, s, "spectrum_fit"));
    out.write_json("spectrum_fit.json", j);
    std::string csv = "omega_rad_s,density,model\n";
    for (std::size_t i = 0; i < spec.omega.size(); ++i)
        csv += io::fmt(spec.omega[i]) + "," + io::fmt(spec.density[i]) + "," +
               io::fmt(f.amplitude * gaussian_pdf(spec.omega[i], f.spectrum)) + "\n";
    out.write("spectrum_fit.csv", csv);
    out.finish({{"command", "spectrum-fit"}});
    std::cout << "spectrum-fit: center " << lambda / units::nm << " nm, FWHM " << std_nm * units::fwhm_per_sigma
              << " nm\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qoct: simulate and analyse Michelson QOCT interferograms"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "RNG seed (overrides the scenario)");
    app.add_option("--out", g.out, "output directory (overrides the scenario)");
    app.add_option("--preset", g.preset, "bundled preset name or scenario path");

    auto* sim = app.add_subcommand("simulate", "synthesize ideal and measured interferograms");
    sim->add_option("scenario", g.scenario_file, "scenario TOML");

    std::vector<std::string> traces;
    std::optional<double> pump_nm, cutoff;
    auto* ana = app.add_subcommand("analyze", "spectra, fits and extracted HOM dips of traces");
    ana->add_option("scenario", g.scenario_file, "scenario TOML (analysis settings)");
    ana->add_option("--trace", traces, "trace CSV files")->check(CLI::ExistingFile);
    ana->add_option("--pump-nm", pump_nm, "pump wavelength when no scenario is given");
    ana->add_option("--cutoff-wp", cutoff, "low-pass cutoff in units of omega_p");

    std::optional<std::string> material;
    std::optional<double> thickness;
    int sweep_points = 21;
    auto* dis = app.add_subcommand("dispersion", "broadening factors of a dispersive slab");
    dis->add_option("scenario", g.scenario_file, "scenario TOML");
    dis->add_option("--material", material, "material name");
    dis->add_option("--thickness-mm", thickness, "slab thickness in mm");
    dis->add_option("--sweep-points", sweep_points, "points in the thickness sweep");

    std::string channel = "cross";
    int sweep = 0, bins = 10;
    auto* rec = app.add_subcommand("reconstruct", "fit the gap model to a trace or a simulated scenario");
    rec->add_option("scenario", g.scenario_file, "scenario TOML");
    rec->add_option("--trace", traces, "measured trace CSV files")->check(CLI::ExistingFile);
    rec->add_option("--channel", channel, "channel to reconstruct");
    rec->add_option("--sweep", sweep, "number of seeds for the uncertainty histogram");
    rec->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

    std::optional<std::string> spectrum;
    auto* spf = app.add_subcommand("spectrum-fit", "Gaussian fit of a tabulated spectrum");
    spf->add_option("scenario", g.scenario_file, "scenario TOML");
    spf->add_option("--spectrum", spectrum, "spectrum CSV")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sim) return cmd_simulate(g);
        if (*ana) return cmd_analyze(g, traces, pump_nm, cutoff);
        if (*dis) return cmd_dispersion(g, material, thickness, sweep_points);
        if (*rec) return cmd_reconstruct(g, traces, channel, sweep, bins);
        if (*spf) return cmd_spectrum_fit(g, spectrum);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
