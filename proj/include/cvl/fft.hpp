// Thin FFTW wrapper for real<->half-complex transforms of arbitrary
// (composite) lengths. Planning is serialized; execution is thread-safe on
// distinct buffers.
#pragma once

#include <complex>
#include <vector>

namespace cvl {

// forward r2c: spectrum[j] = sum_t x[t] e^{-2 pi i j t / n}, j in [0, n/2]
std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

// inverse c2r of a half spectrum (length n/2 + 1), normalized by 1/n so that
// ifft_real(fft_real(x), n) == x
std::vector<double> ifft_real(const std::vector<std::complex<double>>& half, int n);

// complex->complex inverse transform, unnormalized
std::vector<std::complex<double>> ifft_complex(const std::vector<std::complex<double>>& in);

}  // namespace cvl
