#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/features.hpp"
#include "neuroframe/signal.hpp"

namespace neuroframe {

// Grayscale frame stack, 100x100 at 100 fps, intensities 0..255.
struct VideoSequence {
  int fps = 100;
  int height = 100;
  int width = 100;
  std::vector<std::uint8_t> pixels;  // frames * height * width, row-major
  std::string subject_id;

  int frames() const {
    return pixels.empty() ? 0 : static_cast<int>(pixels.size() / (static_cast<std::size_t>(height) * width));
  }
  std::uint8_t* frame(int t) { return pixels.data() + static_cast<std::size_t>(t) * height * width; }
  const std::uint8_t* frame(int t) const {
    return pixels.data() + static_cast<std::size_t>(t) * height * width;
  }
  void validate() const {
    if (height != 100 || width != 100)
      throw std::invalid_argument("video: frames must be 100x100");
    if (pixels.size() % (static_cast<std::size_t>(height) * width) != 0)
      throw std::invalid_argument("video: pixel payload is not a whole number of frames");
  }
};

struct ManifestEntry {
  std::string subject;
  std::string utterance;
  std::string eeg;    // EEGR path, or FEAT path once features are extracted
  std::string video;  // VIDG path
  std::string split;  // train | val | test
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.85, 0.05, 0.10};
};

// Seeded shuffle + contiguous assignment with largest-remainder rounding.
// Every split ends up non-empty (requires >= 3 entries).
inline DatasetManifest split_dataset(DatasetManifest manifest, std::array<double, 3> ratios,
                                     std::uint64_t seed) {
  const int n = static_cast<int>(manifest.entries.size());
  if (n < 3) throw std::invalid_argument("split_dataset: need at least 3 entries");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw std::invalid_argument("split_dataset: ratios must be non-negative");

  std::array<int, 3> counts{};
  std::array<double, 3> remainders{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = ratios[static_cast<std::size_t>(i)] * n;
    counts[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(quota));
    remainders[static_cast<std::size_t>(i)] = quota - std::floor(quota);
    assigned += counts[static_cast<std::size_t>(i)];
  }
  for (int left = n - assigned; left > 0; --left) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[static_cast<std::size_t>(i)] > remainders[static_cast<std::size_t>(best)]) best = i;
    ++counts[static_cast<std::size_t>(best)];
    remainders[static_cast<std::size_t>(best)] = -1.0;
  }
  // no split may end up empty; steal from the largest
  for (int i = 0; i < 3; ++i) {
    while (counts[static_cast<std::size_t>(i)] == 0) {
      int largest = 0;
      for (int j = 1; j < 3; ++j)
        if (counts[static_cast<std::size_t>(j)] > counts[static_cast<std::size_t>(largest)]) largest = j;
      --counts[static_cast<std::size_t>(largest)];
      ++counts[static_cast<std::size_t>(i)];
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  seeded_shuffle(order, rng);

  const char* names[3] = {"train", "val", "test"};
  int pos = 0;
  for (int part = 0; part < 3; ++part)
    for (int i = 0; i < counts[static_cast<std::size_t>(part)]; ++i, ++pos)
      manifest.entries[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])].split = names[part];

  manifest.seed = seed;
  manifest.ratios = ratios;
  return manifest;
}

struct SynthConfig {
  int subjects = 7;
  int utterances = 10;  // per subject
  int ticks = 64;       // video frames per utterance
  int latent_dim = 3;
  double noise = 0.4;
  std::uint64_t seed = 1;
  int channels = 31;
  int sample_rate = 1000;
  int frame_rate = 100;
  WindowConfig window;

  void validate() const {
    if (subjects < 1 || utterances < 1 || ticks < 1 || latent_dim < 1 || channels < 1)
      throw std::invalid_argument("synth config: counts must be >= 1");
    if (noise < 0.0) throw std::invalid_argument("synth config: noise must be >= 0");
    window.validate();
    if (sample_rate % frame_rate != 0 || sample_rate / frame_rate != window.hop)
      throw std::invalid_argument("synth config: hop must equal sample_rate / frame_rate");
  }
};

struct SynthItem {
  std::string subject;
  std::string utterance;
  EegRecording eeg;
  VideoSequence video;
};

struct SynthDataset {
  std::vector<SynthItem> items;
  DatasetManifest manifest;
};

namespace detail {

// Smooth bounded squash keeps the rendered geometry inside the canvas.
inline double squash(double v) { return v / (1.0 + std::abs(v)); }

struct LatentTrajectory {
  // z_l(t) = sum_h amp sin(2 pi f t + phase)
  std::vector<std::array<double, 3>> amp, freq, phase;  // [latent][harmonic]

  LatentTrajectory(int latent_dim, Rng& rng) {
    amp.resize(static_cast<std::size_t>(latent_dim));
    freq.resize(static_cast<std::size_t>(latent_dim));
    phase.resize(static_cast<std::size_t>(latent_dim));
    for (int l = 0; l < latent_dim; ++l)
      for (int h = 0; h < 3; ++h) {
        amp[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] = uniform(rng, 0.25, 0.65);
        freq[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] = uniform(rng, 0.4, 2.5);
        phase[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] =
            uniform(rng, 0.0, 2.0 * std::numbers::pi);
      }
  }

  double value(int l, double t_seconds) const {
    double acc = 0.0;
    for (int h = 0; h < 3; ++h)
      acc += amp[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] *
             std::sin(2.0 * std::numbers::pi * freq[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)] *
                          t_seconds +
                      phase[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)]);
    return acc;
  }
};

// Band-limited channel noise: a low band (5..15 Hz) and a high band
// (25..45 Hz) of fixed sinusoids per channel. The caller cross-fades the
// bands and scales the amplitude, so the oscillatory content itself carries
// the latent state through rate, spread and power statistics.
struct NoiseBank {
  std::vector<std::array<double, 16>> amp_lo, freq_lo, phase_lo;
  std::vector<std::array<double, 16>> amp_hi, freq_hi, phase_hi;

  NoiseBank(int channels, Rng& rng) {
    auto init = [&](auto& amp, auto& freq, auto& phase, double f0, double f1) {
      amp.resize(static_cast<std::size_t>(channels));
      freq.resize(static_cast<std::size_t>(channels));
      phase.resize(static_cast<std::size_t>(channels));
      for (int c = 0; c < channels; ++c)
        for (int k = 0; k < 16; ++k) {
          amp[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] =
              uniform(rng, 0.7, 1.3) / std::sqrt(16.0);
          freq[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = uniform(rng, f0, f1);
          phase[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] =
              uniform(rng, 0.0, 2.0 * std::numbers::pi);
        }
    };
    init(amp_lo, freq_lo, phase_lo, 5.0, 15.0);
    init(amp_hi, freq_hi, phase_hi, 25.0, 45.0);
  }

  // band_mix in [0,1]: 0 = all low band, 1 = all high band
  double value(int c, double t_seconds, double band_mix) const {
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < 16; ++k) {
      lo += amp_lo[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] *
            std::sin(2.0 * std::numbers::pi * freq_lo[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] *
                         t_seconds +
                     phase_lo[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
      hi += amp_hi[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] *
            std::sin(2.0 * std::numbers::pi * freq_hi[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] *
                         t_seconds +
                     phase_hi[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
    }
    return (1.0 - band_mix) * lo + band_mix * hi;
  }
};

// Renders a dim face disc whose brightness tracks s0, with an elliptical
// mouth whose position and opening track s1 and s2. Pure threshold
// rasterization, no anti-aliasing.
inline void render_frame(double s0, double s1, double s2, std::uint8_t* out) {
  const double face_intensity = 110.0 + 45.0 * s0;
  const double mouth_cx = 50.0 + 10.0 * s1;
  const double mouth_cy = 62.0;
  const double mouth_ax = 13.0 + 5.0 * s2;
  const double mouth_ay = 8.0 + 3.0 * s2;
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) {
      double value = 8.0;  // background
      const double dr = r - 50.0, dc = c - 50.0;
      if (dr * dr + dc * dc <= 38.0 * 38.0) value = face_intensity;
      const double mr = (r - mouth_cy) / mouth_ay, mc = (c - mouth_cx) / mouth_ax;
      if (mr * mr + mc * mc <= 1.0) value = 25.0;
      const double clamped = value < 0.0 ? 0.0 : (value > 255.0 ? 255.0 : value);
      out[r * 100 + c] = static_cast<std::uint8_t>(std::lround(clamped));
    }
  }
}

}  // namespace detail

// A seeded latent trajectory drives both modalities: EEG channels are fixed
// linear mixtures of the latent plus band-limited noise at the EEG rate;
// frames render face/mouth geometry from the same latent at the frame rate.
// EEG length is chosen so feature extraction yields exactly `ticks` rows.
inline SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthDataset out;

  const std::int64_t eeg_len =
      static_cast<std::int64_t>(cfg.window.hop) * (cfg.ticks - 1) + cfg.window.window_len;
  // feature window r covers samples [r*hop, r*hop + window); align the frame
  // clock with the window centers
  const double frame_offset = 0.5 * cfg.window.window_len / cfg.sample_rate;

  // One mixing matrix and one oscillator bank for the whole dataset:
  // utterances and subjects must differ only through the latent state, or
  // the feature statistics carry identity information the frames never show.
  std::vector<double> mix(static_cast<std::size_t>(cfg.channels) * cfg.latent_dim);
  for (auto& v : mix) {
    v = uniform(rng, 0.3, 1.0);
    if (uniform01(rng) < 0.5) v = -v;
  }
  const detail::NoiseBank noise(cfg.channels, rng);

  for (int s = 0; s < cfg.subjects; ++s) {
    const std::string subject = "s" + std::to_string(s + 1);
    for (int u = 0; u < cfg.utterances; ++u) {
      char uname[16];
      std::snprintf(uname, sizeof(uname), "u%03d", u);
      const detail::LatentTrajectory latent(cfg.latent_dim, rng);

      SynthItem item;
      item.subject = subject;
      item.utterance = uname;

      item.eeg.sample_rate = cfg.sample_rate;
      item.eeg.subject_id = subject;
      item.eeg.channels.assign(static_cast<std::size_t>(cfg.channels),
                               std::vector<double>(static_cast<std::size_t>(eeg_len)));
      // The latent drives the mixtures directly and also the oscillation
      // statistics: amplitude follows s1, band balance follows s2, so every
      // windowed feature family stays informative about the shared state.
      // Each utterance samples the shared bank at its own random time offset;
      // identical long-run statistics, but no common per-tick pattern.
      const double bank_offset = uniform(rng, 0.0, 30.0);
      std::vector<double> z(static_cast<std::size_t>(cfg.latent_dim));
      for (std::int64_t k = 0; k < eeg_len; ++k) {
        const double t = static_cast<double>(k) / cfg.sample_rate;
        for (int l = 0; l < cfg.latent_dim; ++l) z[static_cast<std::size_t>(l)] = latent.value(l, t);
        const double s1 = detail::squash(z[static_cast<std::size_t>(cfg.latent_dim > 1 ? 1 : 0)]);
        const double s2 = detail::squash(z[static_cast<std::size_t>(cfg.latent_dim > 2 ? 2 : 0)]);
        const double osc_amp = cfg.noise * (0.55 + 0.45 * s1);
        const double band_mix = 0.5 + 0.5 * s2;
        for (int c = 0; c < cfg.channels; ++c) {
          double v = 0.0;
          for (int l = 0; l < cfg.latent_dim; ++l)
            v += mix[static_cast<std::size_t>(c) * cfg.latent_dim + l] * z[static_cast<std::size_t>(l)];
          if (cfg.noise > 0.0) v += osc_amp * noise.value(c, t + bank_offset, band_mix);
          item.eeg.channels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = v;
        }
      }

      item.video.fps = cfg.frame_rate;
      item.video.subject_id = subject;
      item.video.pixels.resize(static_cast<std::size_t>(cfg.ticks) * 100 * 100);
      for (int t = 0; t < cfg.ticks; ++t) {
        const double ts = static_cast<double>(t) / cfg.frame_rate + frame_offset;
        const double s0 = detail::squash(latent.value(0, ts));
        const double s1 = detail::squash(latent.value(cfg.latent_dim > 1 ? 1 : 0, ts));
        const double s2 = detail::squash(latent.value(cfg.latent_dim > 2 ? 2 : 0, ts));
        detail::render_frame(s0, s1, s2, item.video.frame(t));
      }

      ManifestEntry entry;
      entry.subject = subject;
      entry.utterance = uname;
      entry.eeg = subject + "_" + uname + ".eegr";
      entry.video = subject + "_" + uname + ".vidg";
      out.manifest.entries.push_back(entry);
      out.items.push_back(std::move(item));
    }
  }

  if (out.manifest.entries.size() >= 3)
    out.manifest = split_dataset(std::move(out.manifest), {0.85, 0.05, 0.10}, cfg.seed);
  else
    out.manifest.seed = cfg.seed;
  return out;
}

}  // namespace neuroframe
