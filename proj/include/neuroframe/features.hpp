#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/fft.hpp"
#include "neuroframe/signal.hpp"

namespace neuroframe {

struct WindowConfig {
  int window_len = 100;  // samples
  int hop = 10;          // samples
  int fft_len = 128;     // periodogram length, power of two >= window_len

  void validate() const {
    if (hop < 1) throw std::invalid_argument("window config: hop must be >= 1");
    if (window_len < 2) throw std::invalid_argument("window config: window_len must be >= 2");
    if (!is_power_of_two(fft_len) || fft_len < window_len)
      throw std::invalid_argument("window config: fft_len must be a power of two >= window_len");
  }
};

// Feature matrix at a fixed tick rate, one row per tick, row-major.
struct FeatureSequence {
  int rate = 100;
  int dim = 0;
  std::int64_t rows = 0;
  std::vector<double> data;
  std::vector<std::string> names;
  std::string subject_id;

  double& at(std::int64_t row, int col) { return data[static_cast<std::size_t>(row) * dim + col]; }
  double at(std::int64_t row, int col) const {
    return data[static_cast<std::size_t>(row) * dim + col];
  }
  const double* row(std::int64_t r) const { return data.data() + static_cast<std::size_t>(r) * dim; }
};

inline double rms(std::span<const double> window) {
  if (window.empty()) throw std::invalid_argument("rms: empty window");
  double acc = 0.0;
  for (double v : window) acc += v * v;
  return std::sqrt(acc / static_cast<double>(window.size()));
}

// Fraction of adjacent sign changes. Zeros inherit the sign of the previous
// nonzero sample; leading zeros count as positive.
inline double zero_crossing_rate(std::span<const double> window) {
  if (window.size() < 2) throw std::invalid_argument("zero_crossing_rate: need >= 2 samples");
  int prev = window[0] > 0.0 ? 1 : (window[0] < 0.0 ? -1 : 1);
  std::int64_t changes = 0;
  for (std::size_t i = 1; i < window.size(); ++i) {
    const int sign = window[i] > 0.0 ? 1 : (window[i] < 0.0 ? -1 : prev);
    if (sign != prev) ++changes;
    prev = sign;
  }
  return static_cast<double>(changes) / static_cast<double>(window.size() - 1);
}

inline double moving_window_average(std::span<const double> window) {
  if (window.empty()) throw std::invalid_argument("moving_window_average: empty window");
  double acc = 0.0;
  for (double v : window) acc += v;
  return acc / static_cast<double>(window.size());
}

// Pearson (non-excess) kurtosis m4/m2^2 with 1/N central moments. Gaussian
// data sits at 3. Windows with near-zero variance are degenerate.
inline double kurtosis(std::span<const double> window) {
  const std::size_t n = window.size();
  if (n < 4) throw std::invalid_argument("kurtosis: need >= 4 samples");
  double mean = 0.0, meansq = 0.0;
  for (double v : window) {
    mean += v;
    meansq += v * v;
  }
  mean /= static_cast<double>(n);
  meansq /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : window) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 1e-12 * meansq || m2 <= 0.0)
    throw DegenerateWindow("kurtosis: window variance is (near) zero");
  return m4 / (m2 * m2);
}

// Shannon entropy of the normalized one-sided periodogram (bins 1..fft_len/2,
// zero-padded, no taper), divided by log(bin count) so the result is in [0,1].
inline double power_spectral_entropy(std::span<const double> window, const WindowConfig& cfg) {
  if (window.size() < 2) throw std::invalid_argument("power_spectral_entropy: need >= 2 samples");
  cfg.validate();
  if (static_cast<int>(window.size()) > cfg.fft_len)
    throw std::invalid_argument("power_spectral_entropy: window longer than fft_len");

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_len));
  for (std::size_t i = 0; i < window.size(); ++i) buf[i] = window[i];
  fft_inplace(buf);

  const int bins = cfg.fft_len / 2;
  double total = 0.0;
  for (int k = 1; k <= bins; ++k) total += std::norm(buf[static_cast<std::size_t>(k)]);
  if (total <= 0.0) return 0.0;

  double entropy = 0.0;
  for (int k = 1; k <= bins; ++k) {
    const double p = std::norm(buf[static_cast<std::size_t>(k)]) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return entropy / std::log(static_cast<double>(bins));
}

constexpr int kFeaturesPerChannel = 5;
inline const char* kFeatureNames[kFeaturesPerChannel] = {"rms", "zcr", "mwa", "kurt", "pse"};

// Windowed per-channel features in fixed order (rms, zcr, mwa, kurt, pse),
// channel-major columns. Degenerate kurtosis windows emit 0.
inline FeatureSequence extract_features(const EegRecording& recording, const WindowConfig& cfg) {
  recording.validate();
  cfg.validate();
  const std::int64_t len = recording.samples_per_channel();
  if (len < cfg.window_len)
    throw std::invalid_argument("extract_features: recording shorter than one window");
  if (recording.sample_rate % cfg.hop != 0)
    throw std::invalid_argument("extract_features: hop must divide the sample rate");

  const int channels = recording.channel_count();
  FeatureSequence out;
  out.rate = recording.sample_rate / cfg.hop;
  out.dim = channels * kFeaturesPerChannel;
  out.rows = (len - cfg.window_len) / cfg.hop + 1;
  out.subject_id = recording.subject_id;
  out.data.assign(static_cast<std::size_t>(out.rows) * out.dim, 0.0);
  out.names.reserve(static_cast<std::size_t>(out.dim));
  for (int c = 0; c < channels; ++c)
    for (int f = 0; f < kFeaturesPerChannel; ++f)
      out.names.push_back("ch" + std::to_string(c) + "." + kFeatureNames[f]);

  for (std::int64_t r = 0; r < out.rows; ++r) {
    const std::int64_t start = r * cfg.hop;
    for (int c = 0; c < channels; ++c) {
      const std::span<const double> win(recording.channels[static_cast<std::size_t>(c)].data() + start,
                                        static_cast<std::size_t>(cfg.window_len));
      double kurt = 0.0;
      try {
        kurt = kurtosis(win);
      } catch (const DegenerateWindow&) {
        kurt = 0.0;
      }
      double* row = out.data.data() + (static_cast<std::size_t>(r) * out.dim + c * kFeaturesPerChannel);
      row[0] = rms(win);
      row[1] = zero_crossing_rate(win);
      row[2] = moving_window_average(win);
      row[3] = kurt;
      row[4] = power_spectral_entropy(win, cfg);
    }
  }
  return out;
}

}  // namespace neuroframe
