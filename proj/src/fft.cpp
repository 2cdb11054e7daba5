#include "qoct/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace qoct {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

std::vector<std::complex<double>> rfft_unitary(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("rfft: empty input");
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan p;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                 FFTW_ESTIMATE);
    }
    fftw_execute(p);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(p);
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : out) v *= s;
    return out;
}

std::vector<double> irfft_unitary(std::span<const std::complex<double>> X, std::size_t n) {
    if (X.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum length does not match n");
    std::vector<std::complex<double>> in(X.begin(), X.end());
    std::vector<double> out(n);
    fftw_plan p;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        p = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                 FFTW_ESTIMATE);
    }
    fftw_execute(p);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(p);
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : out) v *= s;
    return out;
}

std::vector<std::complex<double>> fft_unitary(std::span<const std::complex<double>> x, bool inverse) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("fft: empty input");
    std::vector<std::complex<double>> in(x.begin(), x.end()), out(n);
    fftw_plan p;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        p = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()), inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                             FFTW_ESTIMATE);
    }
    fftw_execute(p);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(p);
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : out) v *= s;
    return out;
}

}  // namespace qoct
