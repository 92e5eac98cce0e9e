#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace neuroframe {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<int>(n)))
    throw std::invalid_argument("fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace neuroframe
