#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace qoct {

// n^2 = 1 + sum_i B_i l^2 / (l^2 - C_i^2), l the vacuum wavelength.
struct SellmeierMaterial {
    std::string name;
    std::vector<double> B;
    std::vector<double> C;  // m
    double lambda_min = 0.0;  // m, validity window
    double lambda_max = 0.0;

    bool in_window(double omega) const;
    // Throw std::domain_error outside the validity window or for omega <= 0.
    double index(double omega) const;
    double dn_domega(double omega) const;    // s, analytic
    double d2n_domega2(double omega) const;  // s^2, analytic
    // Evaluation without the window check, for band edges of a simulation.
    double index_unchecked(double omega) const;
};

class MaterialLibrary {
public:
    static MaterialLibrary load(const std::filesystem::path& json_file);
    static const MaterialLibrary& builtin();  // data/materials.json of the source tree

    const SellmeierMaterial& get(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, SellmeierMaterial> materials_;
};

double sellmeier_index(const SellmeierMaterial& m, double omega);
double sellmeier_dn_domega(const SellmeierMaterial& m, double omega);

}  // namespace qoct
