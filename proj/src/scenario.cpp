#include "qoct/scenario.hpp"

#include "qoct/error.hpp"
#include "qoct/io.hpp"
#include "qoct/material.hpp"
#include "qoct/toml.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qoct {

namespace {

const std::vector<std::string> unit_suffixes = {"_nm_s", "_nm", "_um", "_mm", "_m",   "_thz", "_ghz",
                                                "_hz",   "_ms", "_ns", "_s",  "_cps", "_wp"};

const std::set<std::string> dimensionless = {"r",    "r1",   "r2",         "t1",   "passes", "echo_count",
                                             "order", "runs", "seed",      "efficiency", "savgol_order",
                                             "threshold_sigmas"};

bool has_suffix(const std::string& key) {
    for (const auto& suf : unit_suffixes)
        if (key.size() > suf.size() && key.compare(key.size() - suf.size(), suf.size(), suf) == 0) return true;
    return false;
}

class Section {
public:
    Section(const toml::Table& t, std::string name, std::string origin)
        : t_(t), name_(std::move(name)), origin_(std::move(origin)) {}

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
    }
    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        fail(line_of(key), where(key) + ": " + msg);
    }

    int line_of(const std::string& key) const {
        auto it = t_.values.find(key);
        return it == t_.values.end() ? t_.line : it->second.line;
    }
    std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return t_.values.count(key) > 0;
    }

    const toml::Value& get(const std::string& key) {
        if (!has(key)) fail(t_.line, "missing required key '" + where(key) + "'");
        return t_.values.at(key);
    }

    double number(const std::string& key, double scale) {
        const auto& v = get(key);
        if (!v.is_number()) fail_key(key, "expected a number");
        const double x = std::get<double>(v.data);
        if (!std::isfinite(x)) fail_key(key, "must be finite");
        return x * scale;
    }
    double number(const std::string& key, double scale, double fallback) {
        return has(key) ? number(key, scale) : fallback;
    }
    double positive(const std::string& key, double scale) {
        const double x = number(key, scale);
        if (!(x > 0.0)) fail_key(key, "must be > 0");
        return x;
    }
    double positive(const std::string& key, double scale, double fallback) {
        return has(key) ? positive(key, scale) : fallback;
    }
    long long integer(const std::string& key, long long fallback, long long lo, long long hi) {
        if (!has(key)) return fallback;
        const auto& v = t_.values.at(key);
        if (!v.is_number() || !v.integer) fail_key(key, "expected an integer");
        const double x = std::get<double>(v.data);
        if (x < static_cast<double>(lo) || x > static_cast<double>(hi))
            fail_key(key, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<long long>(x);
    }
    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = t_.values.at(key);
        if (!v.is_string()) fail_key(key, "expected a string");
        return std::get<std::string>(v.data);
    }
    std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
        const std::string s = string(key, fallback);
        if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
            fail_key(key, "'" + s + "' is not one of " + opts);
        }
        return s;
    }
    // Array of three numbers or one number broadcast to three.
    std::array<double, 3> triple(const std::string& key, double scale, double fallback) {
        if (!has(key)) return {fallback, fallback, fallback};
        const auto& v = t_.values.at(key);
        if (v.is_number()) {
            const double x = std::get<double>(v.data) * scale;
            return {x, x, x};
        }
        if (!v.is_array()) fail_key(key, "expected a number or an array of three numbers");
        const auto& a = std::get<toml::Array>(v.data);
        if (a.size() != 3) fail_key(key, "expected three values (D1, D2, D3)");
        std::array<double, 3> out{};
        for (std::size_t i = 0; i < 3; ++i) {
            if (!a[i].is_number()) fail_key(key, "expected numbers");
            out[i] = std::get<double>(a[i].data) * scale;
        }
        return out;
    }
    std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) {
        if (!has(key)) return fallback;
        const auto& v = t_.values.at(key);
        if (!v.is_array()) fail_key(key, "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : std::get<toml::Array>(v.data)) {
            if (!e.is_string()) fail_key(key, "expected an array of strings");
            out.push_back(std::get<std::string>(e.data));
        }
        return out;
    }

    // Every key must have been consumed; numeric keys without a unit suffix
    // get a dedicated message.
    void finish(const std::set<std::string>& tables = {}) const {
        for (const auto& [k, v] : t_.values) {
            if (seen_.count(k)) continue;
            const bool numeric =
                v.is_number() || (v.is_array() && !std::get<toml::Array>(v.data).empty() &&
                                  std::get<toml::Array>(v.data).front().is_number());
            if (numeric && !has_suffix(k) && !dimensionless.count(k))
                fail(v.line, "numeric key '" + where(k) +
                                 "' needs a unit suffix (_nm, _um, _mm, _m, _thz, _ghz, _hz, _s, _ms, _ns, _cps, _wp, "
                                 "_nm_s)");
            fail(v.line, "unknown key '" + where(k) + "'");
        }
        for (const auto& [k, t] : t_.tables)
            if (!tables.count(k)) fail(t.line, "unknown table [" + where(k) + "]");
    }

private:
    const toml::Table& t_;
    std::string name_;
    std::string origin_;
    std::set<std::string> seen_;
};

const toml::Table& subtable(const toml::Table& root, const std::string& name, const std::string& origin,
                            bool required) {
    static const toml::Table empty{};
    auto it = root.tables.find(name);
    if (it == root.tables.end()) {
        if (required) throw ConfigError(origin + ":1: missing required table [" + name + "]");
        return empty;
    }
    return it->second;
}

}  // namespace

double phasematch_from_bandwidth(double pump_wavelength, double pump_std, double width, const std::string& kind) {
    double s = units::wavelength_width_to_omega(2.0 * pump_wavelength, width);
    if (kind == "fwhm")
        s /= units::fwhm_per_sigma;
    else if (kind != "std")
        throw ConfigError("bandwidth_kind must be 'fwhm' or 'std'");
    // marginal std = Delta_plus / 2
    const double dp = 2.0 * s;
    if (!(dp > pump_std)) throw ConfigError("bandwidth is narrower than the pump linewidth");
    return std::sqrt(dp * dp - pump_std * pump_std);
}

Scenario parse_scenario(const std::string& text, const std::string& origin, const std::filesystem::path& base_dir) {
    const toml::Table root = toml::parse(text, origin);
    Scenario sc;
    sc.origin = origin;

    Section top(root, "", origin);
    sc.name = top.string("name", "");
    sc.seed = static_cast<std::uint64_t>(top.integer("seed", 1, 0, (1LL << 53)));
    sc.output = top.string("output", "out");
    top.finish({"source", "sample", "scan", "noise", "analysis"});

    // source
    {
        const auto& t = subtable(root, "source", origin, true);
        Section s(t, "source", origin);
        const double lp = s.positive("pump_wavelength_nm", units::nm);
        sc.source.pump_center = units::wavelength_to_omega(lp);
        if (s.has("pump_std_ghz") == s.has("pump_linewidth_nm"))
            s.fail(t.line, "[source] needs exactly one of pump_std_ghz, pump_linewidth_nm");
        if (s.has("pump_std_ghz"))
            sc.source.pump_std = s.positive("pump_std_ghz", units::two_pi * 1e9);
        else
            sc.source.pump_std =
                units::wavelength_width_to_omega(lp, s.positive("pump_linewidth_nm", units::nm)) / units::fwhm_per_sigma;

        if (s.has("phasematch_std_thz") == s.has("bandwidth_nm"))
            s.fail(t.line, "[source] needs exactly one of phasematch_std_thz, bandwidth_nm");
        if (s.has("phasematch_std_thz")) {
            sc.source.phasematch_std = s.positive("phasematch_std_thz", units::two_pi * 1e12);
            sc.bandwidth_kind = "std";
            if (s.has("bandwidth_kind")) s.fail_key("bandwidth_kind", "only valid together with bandwidth_nm");
        } else {
            if (!s.has("bandwidth_kind"))
                s.fail_key("bandwidth_nm", "requires bandwidth_kind = \"fwhm\" or \"std\"");
            sc.bandwidth_kind = s.choice("bandwidth_kind", "", {"fwhm", "std"});
            const double bw = s.positive("bandwidth_nm", units::nm);
            try {
                sc.source.phasematch_std = phasematch_from_bandwidth(lp, sc.source.pump_std, bw, sc.bandwidth_kind);
            } catch (const ConfigError& e) {
                s.fail_key("bandwidth_nm", e.what());
            }
        }
        if (s.has("spectrum_file")) {
            std::filesystem::path p = s.string("spectrum_file", "");
            if (p.is_relative()) p = base_dir / p;
            if (!std::filesystem::exists(p)) s.fail_key("spectrum_file", "file '" + p.string() + "' does not exist");
            sc.spectrum_file = p.string();
        }
        try {
            sc.source.validate();
        } catch (const std::invalid_argument& e) {
            s.fail(t.line, e.what());
        }
        s.finish();
    }

    // sample
    {
        const auto& t = subtable(root, "sample", origin, true);
        Section s(t, "sample", origin);
        const std::string type = s.choice("type", "", {"mirror", "single_layer", "dispersive_slab", "gap"});
        if (type == "mirror" || type == "single_layer") {
            SingleLayer l;
            l.r = s.number("r", 1.0, 1.0);
            l.T = units::mirror_to_delay(s.number("position_um", units::um, 0.0));
            sc.sample = l;
        } else if (type == "dispersive_slab") {
            DispersiveSlab d;
            d.thickness = s.number("thickness_mm", units::mm);
            const std::string mat = s.string("material", "silicon");
            try {
                d.material = MaterialLibrary::builtin().get(mat);
            } catch (const ConfigError& e) {
                s.fail_key("material", e.what());
            }
            d.r = s.number("r", 1.0, 1.0);
            d.passes = static_cast<int>(s.integer("passes", 2, 1, 16));
            d.index_model =
                s.choice("index_model", "exact", {"exact", "linearized"}) == "exact" ? IndexModel::exact
                                                                                     : IndexModel::linearized;
            d.reference_omega = sc.source.degenerate_center();
            d.extra_delay = units::mirror_to_delay(s.number("position_um", units::um, 0.0));
            sc.sample = d;
        } else {
            GapSample g;
            g.r1 = s.number("r1", 1.0);
            g.r2 = s.number("r2", 1.0);
            g.t1 = s.number("t1", 1.0, std::sqrt(std::max(0.0, 1.0 - g.r1 * g.r1)));
            g.gap = s.positive("gap_um", units::um);
            g.x1 = s.number("x1_um", units::um, 0.0);
            g.echo_count = static_cast<int>(s.integer("echo_count", 4, 1, 64));
            sc.sample = g;
        }
        try {
            validate(sc.sample);
        } catch (const std::exception& e) {
            s.fail(t.line, std::string("[sample] ") + e.what());
        }
        s.finish();
    }

    // scan
    {
        const auto& t = subtable(root, "scan", origin, true);
        Section s(t, "scan", origin);
        const std::string mode = s.choice("mode", "step", {"step", "continuous"});
        if (mode == "step") {
            StepScan st;
            st.step = s.positive("step_nm", units::nm, st.step);
            st.exposure = s.positive("exposure_s", 1.0, st.exposure);
            sc.plan.mode = st;
        } else {
            ContinuousScan c;
            c.velocity = s.positive("velocity_nm_s", units::nm, c.velocity);
            c.bin_width = s.positive("bin_nm", units::nm, c.bin_width);
            sc.plan.mode = c;
        }
        const double a = s.number("start_um", units::um);
        const double b = s.number("end_um", units::um);
        if (!(b > a)) s.fail_key("end_um", "scan span is empty (end_um <= start_um)");
        sc.plan.tau_start = units::mirror_to_delay(a);
        sc.plan.tau_end = units::mirror_to_delay(b);
        sc.kinds.clear();
        for (const auto& k : s.strings("kinds", {"single", "auto", "cross"})) {
            try {
                sc.kinds.push_back(parse_kind(k));
            } catch (const ConfigError& e) {
                s.fail_key("kinds", e.what());
            }
        }
        try {
            sc.plan.validate();
            (void)sc.plan.sample_delays();
        } catch (const std::invalid_argument& e) {
            s.fail(t.line, std::string("[scan] ") + e.what());
        }
        s.finish();
    }

    // noise
    {
        const auto& t = subtable(root, "noise", origin, false);
        Section s(t, "noise", origin);
        auto& m = sc.noise.model;
        m.path_jitter_std = s.number("jitter_nm", units::nm, 0.0);
        m.jitter_correlation = s.number("jitter_correlation_um", units::um, 0.0);
        m.pair_rate = s.number("pair_rate_cps", 1.0, 0.0);
        m.efficiency = s.triple("efficiency", 1.0, 1.0);
        m.dark_rate = s.triple("dark_cps", 1.0, 0.0);
        m.coincidence_window = s.positive("window_ns", 1e-9, m.coincidence_window);
        m.seed = sc.seed;
        sc.noise.runs = static_cast<int>(s.integer("runs", 1, 1, 10000));
        sc.noise.jitter =
            s.choice("jitter", "per_point", {"per_point", "averaged"}) == "averaged" ? JitterMode::averaged
                                                                                      : JitterMode::per_point;
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            s.fail(t.line, std::string("[noise] ") + e.what());
        }
        s.finish();
    }

    // analysis
    {
        const auto& t = subtable(root, "analysis", origin, false);
        Section s(t, "analysis", origin);
        auto& a = sc.analysis;
        a.cutoff = s.positive("cutoff_wp", 1.0, a.cutoff);
        if (s.has("sigma1_wp")) a.sigma1 = s.positive("sigma1_wp", 1.0);
        a.fit_lo = s.number("fit_lo_wp", 1.0, a.fit_lo);
        a.fit_hi = s.number("fit_hi_wp", 1.0, a.fit_hi);
        if (!(a.fit_hi > a.fit_lo)) s.fail_key("fit_hi_wp", "must exceed fit_lo_wp");
        a.savgol_window_um = s.positive("savgol_window_um", 1.0, a.savgol_window_um);
        a.savgol_order = static_cast<int>(s.integer("savgol_order", a.savgol_order, 0, 10));
        a.threshold_sigmas = s.positive("threshold_sigmas", 1.0, a.threshold_sigmas);
        s.finish();
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.string(), path.parent_path());
}

std::filesystem::path preset_path(const std::string& name) {
    std::filesystem::path p(name);
    if (std::filesystem::exists(p)) return p;
    const std::filesystem::path dir(QOCT_PRESET_DIR);
    for (const auto& cand : {dir / name, dir / (name + ".toml")})
        if (std::filesystem::exists(cand)) return cand;
    throw ConfigError("unknown preset '" + name + "'");
}

Simulation simulate(const Scenario& s, std::uint64_t seed, const QuadratureGrid& grid_in) {
    Simulation sim;
    sim.tau = s.plan.sample_delays();
    for (double t : sim.tau) sim.position.push_back(units::delay_to_mirror(t));

    QuadratureGrid grid = grid_in;
    grid.box_average = s.plan.bin_delay_width();

    const bool want_auto = std::count(s.kinds.begin(), s.kinds.end(), Kind::autocorrelation) > 0;
    const bool want_cross = std::count(s.kinds.begin(), s.kinds.end(), Kind::crosscorrelation) > 0;

    std::optional<InterferogramTerms> terms;
    if (want_auto || want_cross) terms = quadrature_terms(s.source, s.sample, sim.tau, grid);

    Spectrum spectrum = marginal(s.source);
    if (s.spectrum_file) {
        std::ifstream in(*s.spectrum_file);
        std::stringstream ss;
        ss << in.rdbuf();
        spectrum = io::parse_spectrum_csv(ss.str(), *s.spectrum_file);
    }
    const SinglePhotonTerms port_a = single_photon_terms(spectrum, s.sample, sim.tau, Port::a, grid);
    const SinglePhotonTerms port_b = single_photon_terms(spectrum, s.sample, sim.tau, Port::b, grid);

    auto as_ifg = [&](const SinglePhotonTerms& t) {
        Interferogram g;
        g.tau = t.tau;
        g.values = t.values();
        g.kind = Kind::single;
        g.box_average = t.box_average;
        return g;
    };
    for (Kind k : s.kinds) {
        if (k == Kind::single)
            sim.ideal[k] = as_ifg(port_b);
        else
            sim.ideal[k] = compose(*terms, k == Kind::autocorrelation ? Scheme::autocorrelation
                                                                      : Scheme::crosscorrelation);
    }

    const auto& nm = s.noise.model;
    for (int run = 0; run < s.noise.runs; ++run) {
        const std::uint64_t rs = split_seed(seed, static_cast<std::uint64_t>(run));
        const std::uint64_t jitter_seed = split_seed(rs, 0);
        SinglePhotonTerms pa = port_a, pb = port_b;
        std::optional<InterferogramTerms> tj = terms;
        if (nm.path_jitter_std > 0.0) {
            if (s.noise.jitter == JitterMode::averaged) {
                pa = average_phase_jitter(pa, nm.path_jitter_std);
                pb = average_phase_jitter(pb, nm.path_jitter_std);
                if (tj) tj = average_phase_jitter(*tj, nm.path_jitter_std);
            } else {
                // One path error per point, shared by every detector.
                const double step = sim.tau.size() > 1 ? (sim.tau.back() - sim.tau.front()) / (sim.tau.size() - 1) : 0.0;
                const auto eps = draw_jitter(sim.tau.size(), step, nm.path_jitter_std, nm.jitter_correlation, jitter_seed);
                pa = apply_phase_jitter(pa, eps);
                pb = apply_phase_jitter(pb, eps);
                if (tj) tj = apply_phase_jitter(*tj, eps);
            }
        }
        const auto singles = singles_rates(as_ifg(pa), as_ifg(pb), nm);
        SinglesRates mean_singles;
        auto mean = [](const std::vector<double>& v) {
            double a = 0.0;
            for (double x : v) a += x;
            return a / static_cast<double>(v.size());
        };
        mean_singles.R1 = mean(singles[0].rate);
        mean_singles.R2 = mean(singles[1].rate);
        mean_singles.R3 = mean(singles[2].rate);

        std::vector<MeasuredTrace> channels;
        for (int d = 0; d < 3; ++d)
            channels.push_back(simulate_scan(singles[d], s.plan, split_seed(rs, 1 + static_cast<std::uint64_t>(d))));
        if (want_auto) {
            const auto r = detection_rates(compose(*tj, Scheme::autocorrelation), Scheme::autocorrelation, nm,
                                           &mean_singles);
            channels.push_back(simulate_scan(r, s.plan, split_seed(rs, 4)));
        }
        if (want_cross) {
            const auto r = detection_rates(compose(*tj, Scheme::crosscorrelation), Scheme::crosscorrelation, nm,
                                           &mean_singles);
            channels.push_back(simulate_scan(r, s.plan, split_seed(rs, 5)));
        }
        sim.runs.push_back(std::move(channels));
    }
    return sim;
}

std::vector<double> averaged_channel(const Simulation& sim, const std::string& channel) {
    if (sim.runs.empty()) throw std::invalid_argument("averaged_channel: no runs");
    auto find = [&](const std::vector<MeasuredTrace>& run, const std::string& name) -> const MeasuredTrace* {
        for (const auto& c : run)
            if (c.channel == name) return &c;
        return nullptr;
    };
    RunSet set;
    bool have_singles = true;
    for (const auto& run : sim.runs) {
        const auto* c = find(run, channel);
        if (!c) throw std::invalid_argument("averaged_channel: no channel '" + channel + "'");
        Run r;
        r.position = c->position;
        r.coincidences = c->counts;
        const auto *r1 = find(run, "R1"), *r2 = find(run, "R2"), *r3 = find(run, "R3");
        if (r1 && r2 && r3) {
            r.R1 = r1->counts;
            r.R2 = r2->counts;
            r.R3 = r3->counts;
        } else {
            have_singles = false;
        }
        set.runs.push_back(std::move(r));
    }
    if (have_singles) {
        try {
            return average_runs(normalize_runs(set), 0);
        } catch (const std::invalid_argument&) {
            // zero singles (pair_rate 0, no dark counts): fall through to the plain mean
        }
    }
    std::vector<double> avg(set.runs.front().coincidences.size(), 0.0);
    for (const auto& r : set.runs)
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += r.coincidences[i];
    for (double& v : avg) v /= static_cast<double>(set.runs.size());
    return avg;
}

}  // namespace qoct
