#include "qoct/io.hpp"

#include "qoct/error.hpp"
#include "qoct/units.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qoct::io {

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string interferogram_csv(const Interferogram& ifg) {
    std::string s = "tau_s,delay_um,value,kind\n";
    const std::string k = to_string(ifg.kind);
    for (std::size_t i = 0; i < ifg.tau.size(); ++i)
        s += fmt(ifg.tau[i]) + "," + fmt(units::delay_to_mirror(ifg.tau[i]) / units::um) + "," + fmt(ifg.values[i]) +
             "," + k + "\n";
    return s;
}

std::string measured_csv(const std::vector<MeasuredTrace>& channels) {
    std::string s = "position_um,counts,exposure_s,channel\n";
    for (const auto& c : channels)
        for (std::size_t i = 0; i < c.position.size(); ++i)
            s += fmt(c.position[i] / units::um) + "," + fmt(c.counts[i]) + "," + fmt(c.exposure[i]) + "," + c.channel +
                 "\n";
    return s;
}

std::string spectrum_csv(const SpectrumTrace& sp) {
    std::string s = "omega_over_omega_p,magnitude\n";
    for (std::size_t i = 0; i < sp.omega.size(); ++i) s += fmt(sp.omega[i]) + "," + fmt(sp.magnitude[i]) + "\n";
    return s;
}

namespace {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> lines;
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
    }
    return out;
}

Csv read_csv(const std::string& text, const std::string& origin) {
    Csv c;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto f = split(line);
        if (c.header.empty()) {
            c.header = f;
            continue;
        }
        if (f.size() != c.header.size())
            throw ConfigError(origin + ":" + std::to_string(ln) + ": expected " + std::to_string(c.header.size()) +
                              " fields, got " + std::to_string(f.size()));
        c.rows.push_back(std::move(f));
        c.lines.push_back(ln);
    }
    if (c.header.empty()) throw ConfigError(origin + ": empty file");
    if (c.rows.empty()) throw ConfigError(origin + ": no data rows");
    return c;
}

double num(const Csv& c, std::size_t r, std::size_t col, const std::string& origin) {
    const std::string& s = c.rows[r][col];
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError(origin + ":" + std::to_string(c.lines[r]) + ": invalid number '" + s + "'");
    return v;
}

void expect_header(const Csv& c, const std::vector<std::string>& h, const std::string& origin) {
    if (c.header != h) {
        std::string want;
        for (const auto& x : h) want += (want.empty() ? "" : ",") + x;
        throw ConfigError(origin + ":1: expected header '" + want + "'");
    }
}

}  // namespace

Interferogram parse_interferogram_csv(const std::string& text, const std::string& origin) {
    const Csv c = read_csv(text, origin);
    expect_header(c, {"tau_s", "delay_um", "value", "kind"}, origin);
    Interferogram ifg;
    ifg.kind = parse_kind(c.rows[0][3]);
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
        ifg.tau.push_back(num(c, r, 0, origin));
        ifg.values.push_back(num(c, r, 2, origin));
        if (r > 0 && !(ifg.tau[r] > ifg.tau[r - 1]))
            throw ConfigError(origin + ":" + std::to_string(c.lines[r]) + ": delays must be strictly increasing");
    }
    return ifg;
}

std::map<std::string, MeasuredTrace> parse_measured_csv(const std::string& text, const std::string& origin) {
    const Csv c = read_csv(text, origin);
    expect_header(c, {"position_um", "counts", "exposure_s", "channel"}, origin);
    std::map<std::string, MeasuredTrace> out;
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
        auto& t = out[c.rows[r][3]];
        t.channel = c.rows[r][3];
        const double x = num(c, r, 0, origin) * units::um;
        if (!t.position.empty() && !(x > t.position.back()))
            throw ConfigError(origin + ":" + std::to_string(c.lines[r]) + ": positions must increase within a channel");
        t.position.push_back(x);
        t.tau.push_back(units::mirror_to_delay(x));
        const double n = num(c, r, 1, origin);
        if (n < 0.0) throw ConfigError(origin + ":" + std::to_string(c.lines[r]) + ": negative counts");
        t.counts.push_back(n);
        t.exposure.push_back(num(c, r, 2, origin));
    }
    return out;
}

TabulatedSpectrum parse_spectrum_csv(const std::string& text, const std::string& origin) {
    const Csv c = read_csv(text, origin);
    std::vector<std::pair<double, double>> rows;
    if (c.header == std::vector<std::string>{"omega_rad_s", "density"}) {
        for (std::size_t r = 0; r < c.rows.size(); ++r) rows.emplace_back(num(c, r, 0, origin), num(c, r, 1, origin));
    } else if (c.header == std::vector<std::string>{"wavelength_nm", "counts"}) {
        for (std::size_t r = 0; r < c.rows.size(); ++r) {
            const double l = num(c, r, 0, origin) * units::nm;
            if (!(l > 0.0)) throw ConfigError(origin + ":" + std::to_string(c.lines[r]) + ": wavelength must be > 0");
            // S_w = S_l |d l / d w| = S_l l^2 / (2 pi c)
            rows.emplace_back(units::wavelength_to_omega(l), num(c, r, 1, origin) * l * l / (units::two_pi * units::c));
        }
        std::reverse(rows.begin(), rows.end());
    } else {
        throw ConfigError(origin + ":1: expected header 'omega_rad_s,density' or 'wavelength_nm,counts'");
    }
    return load_tabulated(std::move(rows));
}

nlohmann::json to_json(const FitResult& f) {
    nlohmann::json j;
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < f.values.size(); ++i)
        params.push_back({{"name", f.names[i]}, {"value", f.values[i]}, {"error", f.errors[i]}});
    j["parameters"] = params;
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["residual_norm"] = f.residual_norm;
    j["condition"] = std::isfinite(f.condition) ? nlohmann::json(f.condition) : nlohmann::json("inf");
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    j["message"] = f.message;
    return j;
}

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

void OutputDir::write(const std::string& rel, const std::string& content) {
    write_atomic(root_ / rel, content);
    hashes_[rel] = hex64(fnv1a64(content));
}

void OutputDir::write_json(const std::string& rel, const nlohmann::json& j) { write(rel, j.dump(2) + "\n"); }

void OutputDir::finish(const nlohmann::json& extra) {
    nlohmann::json m = extra;
    m["hash"] = "fnv1a64";
    m["files"] = nlohmann::json::object();
    for (const auto& [k, v] : hashes_) m["files"][k] = v;
    write_atomic(root_ / "manifest.json", m.dump(2) + "\n");
}

nlohmann::json plot_spec(const std::string& title, const std::string& data, const std::string& x,
                         const std::string& y, const std::string& filter_column, const std::string& filter_value) {
    nlohmann::json j = {{"title", title}, {"mark", "line"}, {"data", data}, {"x", x}, {"y", y}};
    if (!filter_column.empty()) j["filter"] = {{"column", filter_column}, {"equals", filter_value}};
    return j;
}

}  // namespace qoct::io
