#pragma once

#include "qoct/acquisition.hpp"
#include "qoct/dsp.hpp"
#include "qoct/fit.hpp"
#include "qoct/interferometer.hpp"
#include "qoct/spectra.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace qoct::io {

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

// Write through a temporary file in the same directory, then rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Shortest round-trip formatting.
std::string fmt(double v);

std::string interferogram_csv(const Interferogram& ifg);
std::string measured_csv(const std::vector<MeasuredTrace>& channels);
std::string spectrum_csv(const SpectrumTrace& s);

Interferogram parse_interferogram_csv(const std::string& text, const std::string& origin);
// Channels keyed by name, each with a shared position axis.
std::map<std::string, MeasuredTrace> parse_measured_csv(const std::string& text, const std::string& origin);
// `omega_rad_s,density` or `wavelength_nm,counts` (converted with |d lambda / d omega|).
TabulatedSpectrum parse_spectrum_csv(const std::string& text, const std::string& origin);

nlohmann::json to_json(const FitResult& f);

// Output directory that records a content hash for every file it writes and
// emits manifest.json on finish().
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root);
    void write(const std::string& relative, const std::string& content);
    void write_json(const std::string& relative, const nlohmann::json& j);
    void finish(const nlohmann::json& extra = nlohmann::json::object());
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    std::map<std::string, std::string> hashes_;
};

// Minimal line-plot description: data file, x/y columns, optional filter.
nlohmann::json plot_spec(const std::string& title, const std::string& data, const std::string& x,
                         const std::string& y, const std::string& filter_column = {},
                         const std::string& filter_value = {});

}  // namespace qoct::io
