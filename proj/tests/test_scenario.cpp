#include "doctest.h"

#include "qoct/error.hpp"
#include "qoct/scenario.hpp"
#include "qoct/toml.hpp"
#include "qoct/units.hpp"

#include <cmath>
#include <string>

using namespace qoct;

namespace {

const std::string source_block = R"(
[source]
pump_wavelength_nm = 656.5
pump_std_ghz = 6.9
phasematch_std_thz = 8.7
)";

const std::string small = R"(name = "small"
seed = 3
)" + source_block + R"(
[sample]
type = "mirror"

[scan]
mode = "step"
step_nm = 70
exposure_s = 0.1
start_um = -10
end_um = 10

[noise]
jitter_nm = 20
jitter_correlation_um = 1
pair_rate_cps = 1e6
efficiency = [0.5, 0.5, 0.5]
dark_cps = 100
runs = 2
)";

std::string error_of(const std::string& text) {
    try {
        parse_scenario(text, "s.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto p = s.find(from);
    REQUIRE(p != std::string::npos);
    return s.replace(p, from.size(), to);
}

}  // namespace

TEST_CASE("toml subset") {
    const auto t = toml::parse("a = 1\nb = 2.5 # c\ns = \"x\\ty\"\nflag = true\n[t]\nv = [1,\n  2, 3]\n[t.u]\nw = -1e3\n");
    CHECK(std::get<double>(t.values.at("a").data) == 1.0);
    CHECK(t.values.at("a").integer);
    CHECK_FALSE(t.values.at("b").integer);
    CHECK(std::get<std::string>(t.values.at("s").data) == "x\ty");
    CHECK(std::get<bool>(t.values.at("flag").data));
    const auto& arr = std::get<toml::Array>(t.tables.at("t").values.at("v").data);
    CHECK(arr.size() == 3);
    CHECK(t.tables.at("t").values.at("v").line == 6);
    CHECK(std::get<double>(t.tables.at("t").tables.at("u").values.at("w").data) == -1000.0);
}

TEST_CASE("toml errors carry the line") {
    auto err = [](const std::string& text) {
        try {
            toml::parse(text, "f");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(err("a = 1\nb = \n").rfind("f:2:", 0) == 0);
    CHECK(err("a = 1\na = 2\n").find("f:2: duplicate key") == 0);
    CHECK(err("\n\ns = \"open\n").rfind("f:3:", 0) == 0);
    CHECK(err("[t\n").rfind("f:1:", 0) == 0);
    CHECK(err("x.y = 1\n").find("dotted keys") != std::string::npos);
    CHECK(err("v = [1, 2\n").find("expected ',' or ']' in array") != std::string::npos);
    CHECK(err("v = 1 2\n").find("trailing") != std::string::npos);
    CHECK(err("v = 12abc\n").find("invalid value") != std::string::npos);
}

TEST_CASE("scenario: small file parses") {
    const Scenario s = parse_scenario(small, "small.toml");
    CHECK(s.name == "small");
    CHECK(s.seed == 3);
    CHECK(s.source.pump_center == doctest::Approx(units::wavelength_to_omega(656.5e-9)));
    CHECK(s.source.pump_std == doctest::Approx(units::two_pi * 6.9e9));
    CHECK(s.source.phasematch_std == doctest::Approx(units::two_pi * 8.7e12));
    CHECK(std::holds_alternative<SingleLayer>(s.sample));
    CHECK(s.noise.runs == 2);
    CHECK(s.noise.model.dark_rate[2] == 100.0);
    CHECK(s.noise.model.path_jitter_std == doctest::Approx(20e-9));
    CHECK(s.plan.tau_start == doctest::Approx(units::mirror_to_delay(-10e-6)));
    CHECK(s.kinds.size() == 3);
}

TEST_CASE("scenario: analysis defaults") {
    const Scenario s = parse_scenario(small, "small.toml");
    CHECK(s.analysis.savgol_window_um == 17.0);
    CHECK(s.analysis.savgol_order == 3);
    CHECK(s.analysis.cutoff == 0.015);
    CHECK_FALSE(s.analysis.sigma1.has_value());
    CHECK(s.analysis.threshold_sigmas == 3.0);
}

TEST_CASE("scenario: unit suffixes are required") {
    const std::string e = error_of(replace(small, "step_nm = 70", "step = 70"));
    CHECK(e.find("s.toml:14:") == 0);
    CHECK(e.find("scan.step") != std::string::npos);
    CHECK(e.find("unit suffix") != std::string::npos);

    const std::string u = error_of(replace(small, "step_nm = 70", "stride_nm = 70"));
    CHECK(u.find("unknown key 'scan.stride_nm'") != std::string::npos);
    CHECK(u.find("s.toml:14:") == 0);

    CHECK(error_of(small + "\n[extra]\nx_nm = 1\n").find("unknown table [extra]") != std::string::npos);
    CHECK(error_of("bogus = \"x\"\n" + small).find("s.toml:1: unknown key 'bogus'") == 0);
}

TEST_CASE("scenario: value errors") {
    CHECK(error_of(replace(small, "end_um = 10", "end_um = -20")).find("scan span is empty") != std::string::npos);
    CHECK(error_of(replace(small, "type = \"mirror\"", "type = \"prism\"")).find("'prism' is not one of") !=
          std::string::npos);
    CHECK(error_of(replace(small, "runs = 2", "runs = 2.5")).find("expected an integer") != std::string::npos);
    CHECK(error_of(replace(small, "runs = 2", "runs = 0")).find("must be in") != std::string::npos);
    CHECK(error_of(replace(small, "exposure_s = 0.1", "exposure_s = -1")).find("must be > 0") != std::string::npos);
    CHECK(error_of(replace(small, "dark_cps = 100", "dark_cps = [1, 2]")).find("three values") != std::string::npos);
    CHECK(error_of(replace(small, "pump_std_ghz = 6.9\n", "")).find("exactly one of pump_std_ghz") !=
          std::string::npos);
    CHECK(error_of(replace(small, "[scan]", "[scan_]")).find("unknown table [scan_]") != std::string::npos);
    const std::string no_scan = small.substr(0, small.find("[scan]")) + small.substr(small.find("[noise]"));
    CHECK(error_of(no_scan).find("missing required table [scan]") != std::string::npos);
    CHECK(error_of(replace(small, "phasematch_std_thz = 8.7", "bandwidth_nm = 50")).find("bandwidth_kind") !=
          std::string::npos);
    CHECK(error_of(replace(small, "mode = \"step\"", "mode = 3")).find("expected a string") != std::string::npos);
}

TEST_CASE("scenario: bandwidth in wavelength") {
    const double lp = 656.5e-9;
    const double dp = units::two_pi * 6.9e9;
    // "std" width w at 2 lp: marginal std = 2 pi c w / (2 lp)^2.
    const double w = 20e-9;
    const double D = phasematch_from_bandwidth(lp, dp, w, "std");
    SpdcSource src;
    src.pump_center = units::wavelength_to_omega(lp);
    src.pump_std = dp;
    src.phasematch_std = D;
    const double expect = units::two_pi * units::c * w / std::pow(2.0 * lp, 2);
    CHECK(marginal(src).std == doctest::Approx(expect).epsilon(1e-12));
    // FWHM is the std times 2 sqrt(2 ln 2).
    const double Df = phasematch_from_bandwidth(lp, dp, w * units::fwhm_per_sigma, "fwhm");
    CHECK(Df == doctest::Approx(D).epsilon(1e-12));
    CHECK_THROWS_AS(phasematch_from_bandwidth(lp, dp, w, "hwhm"), ConfigError);
    CHECK_THROWS_AS(phasematch_from_bandwidth(lp, dp, 1e-18, "std"), ConfigError);

    const Scenario s = parse_scenario(
        replace(small, "phasematch_std_thz = 8.7", "bandwidth_nm = 20\nbandwidth_kind = \"std\""), "bw.toml");
    CHECK(s.source.phasematch_std == doctest::Approx(D));
    CHECK(s.bandwidth_kind == "std");
}

TEST_CASE("scenario: presets load") {
    for (const char* name : {"defectoscopy", "dispersion", "proof_of_concept"}) {
        const Scenario s = load_scenario(preset_path(name));
        CHECK(s.name == name);
        CHECK(s.analysis.cutoff == 0.06);
    }
    const Scenario d = load_scenario(preset_path("defectoscopy"));
    REQUIRE(std::holds_alternative<GapSample>(d.sample));
    CHECK(std::get<GapSample>(d.sample).gap == doctest::Approx(110.67e-6));
    CHECK(d.noise.jitter == JitterMode::averaged);
    CHECK(std::holds_alternative<ContinuousScan>(d.plan.mode));
    CHECK_THROWS_AS(preset_path("no_such_preset"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/x.toml"), ConfigError);
}

TEST_CASE("simulate is deterministic in the seed") {
    const Scenario s = parse_scenario(small, "small.toml");
    const Simulation a = simulate(s, 11);
    const Simulation b = simulate(s, 11);
    const Simulation c = simulate(s, 12);
    REQUIRE(a.runs.size() == 2);
    REQUIRE(a.runs[0].size() == 5);
    bool differs = false;
    for (std::size_t r = 0; r < a.runs.size(); ++r)
        for (std::size_t k = 0; k < a.runs[r].size(); ++k) {
            CHECK(a.runs[r][k].channel == b.runs[r][k].channel);
            CHECK(a.runs[r][k].counts == b.runs[r][k].counts);
            if (a.runs[r][k].counts != c.runs[r][k].counts) differs = true;
        }
    CHECK(differs);
    CHECK(a.ideal.at(Kind::crosscorrelation).values == c.ideal.at(Kind::crosscorrelation).values);
    // Runs within one simulation are independent draws.
    CHECK(a.runs[0][4].counts != a.runs[1][4].counts);

    const auto avg = averaged_channel(a, "cross");
    CHECK(avg.size() == a.tau.size());
    CHECK_THROWS_AS(averaged_channel(a, "nope"), std::invalid_argument);
}
