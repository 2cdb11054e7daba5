#include "qoct/material.hpp"

#include "qoct/error.hpp"
#include "qoct/units.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qoct {

namespace {

// f = n^2 and its first two derivatives with respect to the wavelength.
struct SellmeierEval {
    double f, df, d2f;
};

SellmeierEval sellmeier_eval(const SellmeierMaterial& m, double lambda) {
    const double l2 = lambda * lambda;
    SellmeierEval e{1.0, 0.0, 0.0};
    for (std::size_t i = 0; i < m.B.size(); ++i) {
        const double c2 = m.C[i] * m.C[i];
        const double den = l2 - c2;
        e.f += m.B[i] * l2 / den;
        e.df += -2.0 * m.B[i] * lambda * c2 / (den * den);
        e.d2f += 2.0 * m.B[i] * c2 * (3.0 * l2 + c2) / (den * den * den);
    }
    return e;
}

}  // namespace

bool SellmeierMaterial::in_window(double omega) const {
    if (!(omega > 0.0)) return false;
    const double l = units::omega_to_wavelength(omega);
    return l >= lambda_min && l <= lambda_max;
}

double SellmeierMaterial::index_unchecked(double omega) const {
    return std::sqrt(sellmeier_eval(*this, units::omega_to_wavelength(omega)).f);
}

static void check_window(const SellmeierMaterial& m, double omega) {
    if (!m.in_window(omega)) {
        std::ostringstream os;
        os << m.name << ": frequency " << omega << " rad/s (wavelength "
           << (omega > 0.0 ? units::omega_to_wavelength(omega) / units::nm : 0.0)
           << " nm) outside the validity window " << m.lambda_min / units::nm << "-"
           << m.lambda_max / units::nm << " nm";
        throw std::domain_error(os.str());
    }
}

double SellmeierMaterial::index(double omega) const {
    check_window(*this, omega);
    return index_unchecked(omega);
}

double SellmeierMaterial::dn_domega(double omega) const {
    check_window(*this, omega);
    const double l = units::omega_to_wavelength(omega);
    const auto e = sellmeier_eval(*this, l);
    const double n = std::sqrt(e.f);
    const double dn_dl = e.df / (2.0 * n);
    return dn_dl * (-l / omega);  // dl/dw = -l/w
}

double SellmeierMaterial::d2n_domega2(double omega) const {
    check_window(*this, omega);
    const double l = units::omega_to_wavelength(omega);
    const auto e = sellmeier_eval(*this, l);
    const double n = std::sqrt(e.f);
    const double dn_dl = e.df / (2.0 * n);
    const double d2n_dl2 = (e.d2f - 2.0 * dn_dl * dn_dl) / (2.0 * n);
    // l = k/w: dl/dw = -l/w, d2l/dw2 = 2l/w^2.
    const double dl = -l / omega;
    const double d2l = 2.0 * l / (omega * omega);
    return d2n_dl2 * dl * dl + dn_dl * d2l;
}

double sellmeier_index(const SellmeierMaterial& m, double omega) { return m.index(omega); }
double sellmeier_dn_domega(const SellmeierMaterial& m, double omega) { return m.dn_domega(omega); }

MaterialLibrary MaterialLibrary::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open material file " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("material file " + file.string() + ": " + e.what());
    }
    MaterialLibrary lib;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        try {
            if (v.value("form", "sellmeier") != "sellmeier")
                throw ConfigError("unsupported form");
            SellmeierMaterial m;
            m.name = it.key();
            m.B = v.at("B").get<std::vector<double>>();
            for (double c : v.at("C_um").get<std::vector<double>>()) m.C.push_back(c * units::um);
            const auto w = v.at("validity_um").get<std::vector<double>>();
            if (m.B.size() != m.C.size() || m.B.empty()) throw ConfigError("B and C_um must have equal nonzero length");
            if (w.size() != 2 || !(w[0] > 0.0) || !(w[1] > w[0])) throw ConfigError("bad validity_um");
            m.lambda_min = w[0] * units::um;
            m.lambda_max = w[1] * units::um;
            lib.materials_[m.name] = std::move(m);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("material '" + it.key() + "' in " + file.string() + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("material '" + it.key() + "' in " + file.string() + ": " + e.what());
        }
    }
    return lib;
}

const MaterialLibrary& MaterialLibrary::builtin() {
    static const MaterialLibrary lib = load(std::filesystem::path(QOCT_DATA_DIR) / "materials.json");
    return lib;
}

const SellmeierMaterial& MaterialLibrary::get(const std::string& name) const {
    auto it = materials_.find(name);
    if (it == materials_.end()) throw ConfigError("unknown material '" + name + "'");
    return it->second;
}

std::vector<std::string> MaterialLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : materials_) out.push_back(k);
    return out;
}

}  // namespace qoct
