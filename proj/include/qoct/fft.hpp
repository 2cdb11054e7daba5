#pragma once

#include <complex>
#include <span>
#include <vector>

namespace qoct {

// Unitary real DFT: X_k = N^{-1/2} sum_n x_n e^{-2 pi i k n / N}, k = 0..N/2.
std::vector<std::complex<double>> rfft_unitary(std::span<const double> x);
// Inverse of rfft_unitary for a real signal of length n.
std::vector<double> irfft_unitary(std::span<const std::complex<double>> X, std::size_t n);

// Full-length unitary complex transforms.
std::vector<std::complex<double>> fft_unitary(std::span<const std::complex<double>> x, bool inverse = false);

}  // namespace qoct
