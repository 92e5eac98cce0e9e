#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuroframe {

// File/stream decoding problems: bad magic, truncated payload, extent mismatch.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures: NaN loss, rank deficiency, non-converging solver.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic is undefined on this window (e.g. kurtosis of a constant).
class DegenerateWindow : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using Rng = std::mt19937_64;

// Uniform in [0,1) built from raw engine output. std::uniform_real_distribution
// is implementation-defined, so all seeded generation goes through these.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Marsaglia polar method; avoids std::normal_distribution for the same reason.
class GaussianDraw {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01(rng) - 1.0;
      v = 2.0 * uniform01(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates with explicit draws so the permutation is engine-defined only.
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace neuroframe
