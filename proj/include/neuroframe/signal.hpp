#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"

namespace neuroframe {

// Raw multichannel EEG. Channels are stored separately, all the same length.
struct EegRecording {
  int sample_rate = 1000;
  std::string subject_id;
  std::vector<std::vector<double>> channels;

  int channel_count() const { return static_cast<int>(channels.size()); }
  std::int64_t samples_per_channel() const {
    return channels.empty() ? 0 : static_cast<std::int64_t>(channels.front().size());
  }

  void validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("recording: sample rate must be positive");
    if (channels.empty()) throw std::invalid_argument("recording: no channels");
    const std::size_t len = channels.front().size();
    if (len == 0) throw std::invalid_argument("recording: empty channels");
    for (const auto& ch : channels)
      if (ch.size() != len)
        throw std::invalid_argument("recording: channels have different lengths");
  }
};

// One second-order section, normalized so a0 = 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  // Poles of z^2 + a1 z + a2 lie inside the unit circle iff the coefficients
  // are inside the stability triangle.
  bool is_stable() const {
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
  }
};

struct FilterDesign {
  enum class Kind { BandPass, Notch };
  Kind kind = Kind::BandPass;
  double low_hz = 0.0;
  double high_hz = 0.0;
  int order = 0;
  double q = 0.0;
  double sample_rate = 0.0;
};

struct FilterCascade {
  std::vector<Biquad> stages;
  FilterDesign design;

  bool is_stable() const {
    for (const auto& s : stages)
      if (!s.is_stable()) return false;
    return true;
  }
};

namespace detail {

inline std::complex<double> biquad_response(const Biquad& s, std::complex<double> zinv) {
  const std::complex<double> zinv2 = zinv * zinv;
  return (s.b0 + s.b1 * zinv + s.b2 * zinv2) / (1.0 + s.a1 * zinv + s.a2 * zinv2);
}

inline std::complex<double> cascade_response(const FilterCascade& c, double freq_hz, double fs) {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -w));
  std::complex<double> h(1.0, 0.0);
  for (const auto& s : c.stages) h *= biquad_response(s, zinv);
  return h;
}

// Groups a conjugate-symmetric pole set into real-coefficient quadratics.
inline std::vector<std::pair<double, double>> pair_poles(std::vector<std::complex<double>> poles) {
  std::vector<std::pair<double, double>> quads;  // (a1, a2) of z^2 + a1 z + a2
  std::vector<double> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= 1e-9 * (1.0 + std::abs(p))) {
      reals.push_back(p.real());
    } else if (p.imag() > 0.0) {
      quads.emplace_back(-2.0 * p.real(), std::norm(p));
    }
  }
  std::sort(reals.begin(), reals.end());
  if (reals.size() % 2 != 0)
    throw NumericError("filter design: unpaired real pole");
  for (std::size_t i = 0; i < reals.size(); i += 2)
    quads.emplace_back(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]);
  return quads;
}

}  // namespace detail

// Butterworth band-pass via the lowpass-to-bandpass transform and bilinear
// mapping with frequency pre-warping. An order-2n band-pass factors into n
// biquads, each carrying one zero at z=1 and one at z=-1, normalized to unit
// gain at the (pre-warped) center frequency.
inline FilterCascade design_bandpass(double low_hz, double high_hz, int order, double fs) {
  if (fs <= 0.0) throw std::invalid_argument("design_bandpass: sample rate must be positive");
  if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0))
    throw std::invalid_argument("design_bandpass: need 0 < low < high < fs/2");
  if (order < 2 || order % 2 != 0)
    throw std::invalid_argument("design_bandpass: order must be even and >= 2");

  const int n = order / 2;  // analog prototype order
  const double w1 = 2.0 * fs * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = 2.0 * fs * std::tan(std::numbers::pi * high_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<std::complex<double>> zpoles;
  zpoles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n);
    const std::complex<double> proto(std::cos(theta), std::sin(theta));
    const std::complex<double> alpha = 0.5 * bw * proto;
    const std::complex<double> disc = std::sqrt(alpha * alpha - w0 * w0);
    for (const std::complex<double> s : {alpha + disc, alpha - disc}) {
      const std::complex<double> z = (2.0 * fs + s) / (2.0 * fs - s);
      zpoles.push_back(z);
      if (std::abs(z) >= 1.0)
        throw NumericError("design_bandpass: unstable pole produced");
    }
  }

  FilterCascade cascade;
  cascade.design = {FilterDesign::Kind::BandPass, low_hz, high_hz, order, 0.0, fs};
  for (const auto& [a1, a2] : detail::pair_poles(zpoles)) {
    Biquad s;
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;  // zeros at z = +1 and z = -1
    s.a1 = a1;
    s.a2 = a2;
    cascade.stages.push_back(s);
  }

  // Normalize each stage at the digital frequency the analog center maps to.
  const double center_hz = fs / std::numbers::pi * std::atan(w0 / (2.0 * fs));
  const std::complex<double> zinv =
      std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * center_hz / fs));
  for (auto& s : cascade.stages) {
    const double g = std::abs(detail::biquad_response(s, zinv));
    if (!(g > 0.0)) throw NumericError("design_bandpass: degenerate stage gain");
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
  }
  return cascade;
}

// RBJ cookbook notch: unit gain at DC and Nyquist, a null at freq_hz.
inline FilterCascade design_notch(double freq_hz, double q, double fs) {
  if (fs <= 0.0) throw std::invalid_argument("design_notch: sample rate must be positive");
  if (!(freq_hz > 0.0) || !(freq_hz < fs / 2.0))
    throw std::invalid_argument("design_notch: need 0 < freq < fs/2");
  if (!(q > 0.0)) throw std::invalid_argument("design_notch: Q must be positive");

  const double w0 = 2.0 * std::numbers::pi * freq_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cosw = std::cos(w0);
  const double a0 = 1.0 + alpha;

  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * cosw / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * cosw / a0;
  s.a2 = (1.0 - alpha) / a0;

  FilterCascade cascade;
  cascade.design = {FilterDesign::Kind::Notch, freq_hz, freq_hz, 2, q, fs};
  cascade.stages.push_back(s);
  return cascade;
}

// Causal single pass, direct-form II transposed, zero initial state, each
// channel independent. Output length equals input length.
inline EegRecording apply_filter(const FilterCascade& cascade, const EegRecording& recording) {
  recording.validate();
  EegRecording out = recording;
  for (auto& channel : out.channels) {
    for (const auto& s : cascade.stages) {
      double z1 = 0.0, z2 = 0.0;
      for (double& x : channel) {
        const double y = s.b0 * x + z1;
        z1 = s.b1 * x - s.a1 * y + z2;
        z2 = s.b2 * x - s.a2 * y;
        x = y;
      }
    }
  }
  return out;
}

// Exact transfer-function magnitude on the unit circle, in dB, floored at
// -300 dB so spectral nulls stay finite.
inline double frequency_response_db(const FilterCascade& cascade, double freq_hz, double fs) {
  if (fs <= 0.0) throw std::invalid_argument("frequency_response: sample rate must be positive");
  if (freq_hz < 0.0 || freq_hz > fs / 2.0)
    throw std::invalid_argument("frequency_response: frequency outside [0, fs/2]");
  const double mag = std::abs(detail::cascade_response(cascade, freq_hz, fs));
  constexpr double kFloorDb = -300.0;
  if (!(mag > 0.0)) return kFloorDb;
  return std::max(kFloorDb, 20.0 * std::log10(mag));
}

}  // namespace neuroframe
