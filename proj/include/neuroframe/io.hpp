#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroframe/common.hpp"
#include "neuroframe/data.hpp"
#include "neuroframe/features.hpp"
#include "neuroframe/kpca.hpp"
#include "neuroframe/models.hpp"
#include "neuroframe/signal.hpp"

namespace neuroframe {

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* field) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw FormatError(std::string(field) + ": truncated payload");
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  write_bytes(os, b, 4);
}

inline std::uint32_t read_u32(std::istream& is, const char* field) {
  unsigned char b[4];
  read_bytes(is, b, 4, field);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& is, const char* field) {
  const std::uint64_t lo = read_u32(is, field);
  const std::uint64_t hi = read_u32(is, field);
  return lo | (hi << 32);
}

inline void write_f32(std::ostream& os, float v) { write_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& is, const char* field) {
  return std::bit_cast<float>(read_u32(is, field));
}
inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& is, const char* field) {
  return std::bit_cast<double>(read_u64(is, field));
}

inline void write_magic(std::ostream& os, const char magic[5]) { write_bytes(os, magic, 4); }

inline void expect_magic(std::istream& is, const char magic[5], const char* format) {
  char buf[4];
  read_bytes(is, buf, 4, format);
  if (std::memcmp(buf, magic, 4) != 0)
    throw FormatError(std::string(format) + ": bad magic");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  return is;
}

}  // namespace detail

// ---- EEGR: raw EEG, float32 LE, channel-major ----

inline void save_eegr(const EegRecording& rec, const std::string& path) {
  rec.validate();
  auto os = detail::open_out(path);
  detail::write_magic(os, "EEGR");
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(rec.channel_count()));
  detail::write_u32(os, static_cast<std::uint32_t>(rec.sample_rate));
  detail::write_u64(os, static_cast<std::uint64_t>(rec.samples_per_channel()));
  for (const auto& ch : rec.channels)
    for (double v : ch) detail::write_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("EEGR: write failed for " + path);
}

inline EegRecording load_eegr(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "EEGR", "EEGR");
  const std::uint32_t version = detail::read_u32(is, "EEGR.version");
  if (version != 1) throw FormatError("EEGR: unsupported version");
  const std::uint32_t channels = detail::read_u32(is, "EEGR.channels");
  const std::uint32_t rate = detail::read_u32(is, "EEGR.sample_rate");
  const std::uint64_t samples = detail::read_u64(is, "EEGR.samples");
  if (channels == 0 || samples == 0) throw FormatError("EEGR: empty extents");
  EegRecording rec;
  rec.sample_rate = static_cast<int>(rate);
  rec.channels.assign(channels, std::vector<double>(samples));
  for (auto& ch : rec.channels)
    for (auto& v : ch) v = detail::read_f32(is, "EEGR.samples");
  return rec;
}

// CSV import: header row ch0..chN, one row per sample tick.
inline EegRecording load_eeg_csv(const std::string& path, int sample_rate) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("EEG CSV: missing header");
  std::size_t channels = 1;
  for (char c : line)
    if (c == ',') ++channels;
  EegRecording rec;
  rec.sample_rate = sample_rate;
  rec.channels.assign(channels, {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    for (std::size_t c = 0; c < channels; ++c) {
      if (!std::getline(row, cell, ','))
        throw FormatError("EEG CSV: row with too few columns");
      rec.channels[c].push_back(std::stod(cell));
    }
  }
  rec.validate();
  return rec;
}

// ---- FEAT: feature matrix, float32 LE, row-major ----

inline void save_feat(const FeatureSequence& seq, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "FEAT");
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(seq.dim));
  detail::write_u32(os, static_cast<std::uint32_t>(seq.rate));
  detail::write_u64(os, static_cast<std::uint64_t>(seq.rows));
  for (double v : seq.data) detail::write_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("FEAT: write failed for " + path);
}

inline FeatureSequence load_feat(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "FEAT", "FEAT");
  const std::uint32_t version = detail::read_u32(is, "FEAT.version");
  if (version != 1) throw FormatError("FEAT: unsupported version");
  FeatureSequence seq;
  seq.dim = static_cast<int>(detail::read_u32(is, "FEAT.dim"));
  seq.rate = static_cast<int>(detail::read_u32(is, "FEAT.rate"));
  seq.rows = static_cast<std::int64_t>(detail::read_u64(is, "FEAT.rows"));
  if (seq.dim <= 0 || seq.rows < 0) throw FormatError("FEAT: bad extents");
  seq.data.resize(static_cast<std::size_t>(seq.rows) * seq.dim);
  for (auto& v : seq.data) v = detail::read_f32(is, "FEAT.data");
  seq.names.reserve(static_cast<std::size_t>(seq.dim));
  for (int i = 0; i < seq.dim; ++i) seq.names.push_back("f" + std::to_string(i));
  return seq;
}

inline void save_feat_csv(const FeatureSequence& seq, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  for (int i = 0; i < seq.dim; ++i) {
    if (i) os << ',';
    os << (i < static_cast<int>(seq.names.size()) ? seq.names[static_cast<std::size_t>(i)]
                                                  : "f" + std::to_string(i));
  }
  os << '\n';
  char buf[40];
  for (std::int64_t r = 0; r < seq.rows; ++r) {
    for (int c = 0; c < seq.dim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", seq.at(r, c));
      if (c) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

// ---- VIDG: grayscale frame stack ----

inline void save_vidg(const VideoSequence& video, const std::string& path) {
  video.validate();
  auto os = detail::open_out(path);
  detail::write_magic(os, "VIDG");
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(video.frames()));
  detail::write_u32(os, static_cast<std::uint32_t>(video.height));
  detail::write_u32(os, static_cast<std::uint32_t>(video.width));
  detail::write_bytes(os, video.pixels.data(), video.pixels.size());
  if (!os) throw FormatError("VIDG: write failed for " + path);
}

inline VideoSequence load_vidg(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "VIDG", "VIDG");
  const std::uint32_t version = detail::read_u32(is, "VIDG.version");
  if (version != 1) throw FormatError("VIDG: unsupported version");
  VideoSequence video;
  const std::uint32_t frames = detail::read_u32(is, "VIDG.frames");
  video.height = static_cast<int>(detail::read_u32(is, "VIDG.height"));
  video.width = static_cast<int>(detail::read_u32(is, "VIDG.width"));
  if (video.height != 100 || video.width != 100)
    throw FormatError("VIDG: extent mismatch, frames must be 100x100");
  video.pixels.resize(static_cast<std::size_t>(frames) * 100 * 100);
  detail::read_bytes(is, video.pixels.data(), video.pixels.size(), "VIDG.pixels");
  return video;
}

// ---- PGM: binary P5, one file per frame ----

inline void save_pgm(const std::uint8_t* pixels, int width, int height, const std::string& path) {
  auto os = detail::open_out(path);
  os << "P5\n" << width << ' ' << height << "\n255\n";
  detail::write_bytes(os, pixels, static_cast<std::size_t>(width) * height);
  if (!os) throw FormatError("PGM: write failed for " + path);
}

inline std::vector<std::uint8_t> load_pgm(const std::string& path, int& width, int& height) {
  auto is = detail::open_in(path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw FormatError("PGM: bad magic");
  auto next_token = [&is]() {
    std::string tok;
    for (;;) {
      if (!(is >> tok)) throw FormatError("PGM: truncated header");
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
  };
  width = std::stoi(next_token());
  height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255) throw FormatError("PGM: only maxval 255 is supported");
  is.get();  // single whitespace after header
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  detail::read_bytes(is, pixels.data(), pixels.size(), "PGM.pixels");
  return pixels;
}

// Writes frame_000000.pgm, frame_000001.pgm, ... into dir.
inline void export_pgm_frames(const VideoSequence& video, const std::string& dir,
                              const std::string& prefix = "frame_") {
  std::filesystem::create_directories(dir);
  char name[64];
  for (int t = 0; t < video.frames(); ++t) {
    std::snprintf(name, sizeof(name), "%s%06d.pgm", prefix.c_str(), t);
    save_pgm(video.frame(t), video.width, video.height,
             (std::filesystem::path(dir) / name).string());
  }
}

// ---- manifest: JSON ----

inline void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["seed"] = manifest.seed;
  j["ratios"] = manifest.ratios;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries)
    j["entries"].push_back({{"subject", e.subject},
                            {"utterance", e.utterance},
                            {"eeg", e.eeg},
                            {"video", e.video},
                            {"split", e.split}});
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest: invalid JSON: " + std::string(e.what()));
  }
  DatasetManifest manifest;
  try {
    manifest.seed = j.at("seed").get<std::uint64_t>();
    const auto ratios = j.at("ratios");
    for (int i = 0; i < 3; ++i) manifest.ratios[static_cast<std::size_t>(i)] = ratios.at(static_cast<std::size_t>(i)).get<double>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.subject = e.at("subject").get<std::string>();
      entry.utterance = e.at("utterance").get<std::string>();
      entry.eeg = e.at("eeg").get<std::string>();
      entry.video = e.at("video").get<std::string>();
      entry.split = e.at("split").get<std::string>();
      if (entry.split != "train" && entry.split != "val" && entry.split != "test")
        throw FormatError("manifest: bad split value '" + entry.split + "'");
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest: missing field: " + std::string(e.what()));
  }
  return manifest;
}

// ---- KPCA: fitted model, all float64 LE ----

inline void save_kpca(const KpcaModel& model, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "KPCA");
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(model.input_dim));
  detail::write_u32(os, static_cast<std::uint32_t>(model.train_rows));
  detail::write_u32(os, static_cast<std::uint32_t>(model.out_dim));
  detail::write_u32(os, static_cast<std::uint32_t>(model.subsample_cap));
  detail::write_f64(os, model.kernel.gamma);
  detail::write_f64(os, model.kernel.offset);
  detail::write_f64(os, static_cast<double>(model.kernel.degree));
  for (double v : model.feature_mean) detail::write_f64(os, v);
  for (double v : model.feature_std) detail::write_f64(os, v);
  for (double v : model.training_matrix) detail::write_f64(os, v);
  for (double v : model.kernel_row_means) detail::write_f64(os, v);
  detail::write_f64(os, model.kernel_grand_mean);
  detail::write_f64(os, model.positive_spectrum_sum);
  for (double v : model.eigenvalues) detail::write_f64(os, v);
  for (double v : model.coefficient_matrix) detail::write_f64(os, v);
  if (!os) throw FormatError("KPCA: write failed for " + path);
}

inline KpcaModel load_kpca(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "KPCA", "KPCA");
  const std::uint32_t version = detail::read_u32(is, "KPCA.version");
  if (version != 1) throw FormatError("KPCA: unsupported version");
  KpcaModel model;
  model.input_dim = static_cast<int>(detail::read_u32(is, "KPCA.input_dim"));
  model.train_rows = static_cast<int>(detail::read_u32(is, "KPCA.train_rows"));
  model.out_dim = static_cast<int>(detail::read_u32(is, "KPCA.out_dim"));
  model.subsample_cap = static_cast<int>(detail::read_u32(is, "KPCA.subsample_cap"));
  if (model.input_dim <= 0 || model.train_rows <= 0 || model.out_dim <= 0)
    throw FormatError("KPCA: bad extents");
  model.kernel.gamma = detail::read_f64(is, "KPCA.gamma");
  model.kernel.offset = detail::read_f64(is, "KPCA.offset");
  model.kernel.degree = static_cast<int>(detail::read_f64(is, "KPCA.degree"));
  auto read_vec = [&is](std::vector<double>& v, std::size_t n, const char* field) {
    v.resize(n);
    for (auto& x : v) x = detail::read_f64(is, field);
  };
  read_vec(model.feature_mean, static_cast<std::size_t>(model.input_dim), "KPCA.feature_mean");
  read_vec(model.feature_std, static_cast<std::size_t>(model.input_dim), "KPCA.feature_std");
  read_vec(model.training_matrix, static_cast<std::size_t>(model.train_rows) * model.input_dim,
           "KPCA.training_matrix");
  read_vec(model.kernel_row_means, static_cast<std::size_t>(model.train_rows), "KPCA.row_means");
  model.kernel_grand_mean = detail::read_f64(is, "KPCA.grand_mean");
  model.positive_spectrum_sum = detail::read_f64(is, "KPCA.spectrum_sum");
  read_vec(model.eigenvalues, static_cast<std::size_t>(model.out_dim), "KPCA.eigenvalues");
  read_vec(model.coefficient_matrix, static_cast<std::size_t>(model.train_rows) * model.out_dim,
           "KPCA.coefficients");
  return model;
}

// ---- NNCK: model checkpoint, float32 LE parameters + JSON metadata ----

inline void save_checkpoint(Model& model, const nlohmann::json& metadata, const std::string& path) {
  auto os = detail::open_out(path);
  const auto params = model.net.parameters();
  detail::write_magic(os, "NNCK");
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    detail::write_u32(os, static_cast<std::uint32_t>(p->name.size()));
    detail::write_bytes(os, p->name.data(), p->name.size());
    const auto& shape = p->value.shape;
    const std::uint8_t rank = static_cast<std::uint8_t>(shape.size());
    detail::write_bytes(os, &rank, 1);
    for (int e : shape) detail::write_u32(os, static_cast<std::uint32_t>(e));
    for (float v : p->value.data) detail::write_f32(os, v);
  }
  const std::string meta = metadata.dump();
  detail::write_u64(os, meta.size());
  detail::write_bytes(os, meta.data(), meta.size());
  if (!os) throw FormatError("NNCK: write failed for " + path);
}

struct Checkpoint {
  Model model;
  nlohmann::json metadata;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "NNCK", "NNCK");
  const std::uint32_t version = detail::read_u32(is, "NNCK.version");
  if (version != 1) throw FormatError("NNCK: unsupported version");
  const std::uint32_t count = detail::read_u32(is, "NNCK.param_count");

  struct Blob {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, Blob> blobs;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::read_u32(is, "NNCK.name_len");
    if (name_len > 4096) throw FormatError("NNCK: parameter name too long");
    std::string name(name_len, '\0');
    detail::read_bytes(is, name.data(), name_len, "NNCK.name");
    std::uint8_t rank = 0;
    detail::read_bytes(is, &rank, 1, "NNCK.rank");
    if (rank == 0 || rank > 4) throw FormatError("NNCK: bad parameter rank");
    Blob blob;
    std::int64_t total = 1;
    for (int r = 0; r < rank; ++r) {
      const std::uint32_t e = detail::read_u32(is, "NNCK.extent");
      if (e == 0) throw FormatError("NNCK: zero extent");
      blob.shape.push_back(static_cast<int>(e));
      total *= e;
    }
    blob.data.resize(static_cast<std::size_t>(total));
    for (auto& v : blob.data) v = detail::read_f32(is, "NNCK.data");
    blobs.emplace(std::move(name), std::move(blob));
  }
  const std::uint64_t meta_len = detail::read_u64(is, "NNCK.meta_len");
  std::string meta(meta_len, '\0');
  detail::read_bytes(is, meta.data(), meta_len, "NNCK.metadata");

  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("NNCK: invalid metadata JSON: " + std::string(e.what()));
  }
  if (!ckpt.metadata.contains("arch") || !ckpt.metadata.contains("seed"))
    throw FormatError("NNCK: metadata missing arch/seed");
  ckpt.model = build_model(ckpt.metadata["arch"].get<std::string>(),
                           ckpt.metadata["seed"].get<std::uint64_t>());

  auto params = ckpt.model.net.parameters();
  if (params.size() != blobs.size())
    throw FormatError("NNCK: parameter count mismatch for architecture");
  for (auto* p : params) {
    const auto it = blobs.find(p->name);
    if (it == blobs.end()) throw FormatError("NNCK: missing parameter " + p->name);
    if (it->second.shape != p->value.shape)
      throw FormatError("NNCK: extent mismatch for parameter " + p->name);
    p->value.data = it->second.data;
  }
  return ckpt;
}

// ---- training log CSV ----

inline void save_training_log_csv(const TrainingLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "epoch,train_mse,val_mse\n";
  char buf[96];
  for (std::size_t i = 0; i < log.epochs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", i, log.epochs[i].train_mse,
                  log.epochs[i].val_mse);
    os << buf;
  }
}

}  // namespace neuroframe
