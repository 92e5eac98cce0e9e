#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/data.hpp"
#include "neuroframe/io.hpp"
#include "neuroframe/linalg.hpp"

using namespace neuroframe;

namespace {

DatasetManifest fake_manifest(int n) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    ManifestEntry e;
    e.subject = "s" + std::to_string(i % 3 + 1);
    e.utterance = "u" + std::to_string(i);
    e.eeg = e.subject + "_" + e.utterance + ".eegr";
    e.video = e.subject + "_" + e.utterance + ".vidg";
    m.entries.push_back(e);
  }
  return m;
}

std::map<std::string, int> split_counts(const DatasetManifest& m) {
  std::map<std::string, int> counts;
  for (const auto& e : m.entries) ++counts[e.split];
  return counts;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("split_dataset yields exactly 85/5/10 on 100 entries") {
  const auto m = split_dataset(fake_manifest(100), {0.85, 0.05, 0.10}, 42);
  auto counts = split_counts(m);
  CHECK(counts["train"] == 85);
  CHECK(counts["val"] == 5);
  CHECK(counts["test"] == 10);
}

TEST_CASE("split_dataset keeps every split non-empty on tiny sets") {
  const auto m = split_dataset(fake_manifest(3), {0.85, 0.05, 0.10}, 7);
  auto counts = split_counts(m);
  CHECK(counts["train"] == 1);
  CHECK(counts["val"] == 1);
  CHECK(counts["test"] == 1);
}

TEST_CASE("split_dataset is deterministic and validates ratios") {
  const auto a = split_dataset(fake_manifest(37), {0.85, 0.05, 0.10}, 5);
  const auto b = split_dataset(fake_manifest(37), {0.85, 0.05, 0.10}, 5);
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    CHECK(a.entries[i].split == b.entries[i].split);

  CHECK_THROWS_AS(split_dataset(fake_manifest(10), {0.8, 0.05, 0.10}, 5), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(fake_manifest(2), {0.85, 0.05, 0.10}, 5), std::invalid_argument);
}

TEST_CASE("split_dataset partitions are disjoint and exhaustive across sizes and seeds") {
  for (int n : {3, 7, 20, 101, 463}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const auto m = split_dataset(fake_manifest(n), {0.85, 0.05, 0.10}, seed);
      auto counts = split_counts(m);
      CHECK(counts["train"] + counts["val"] + counts["test"] == n);
      CHECK(counts["train"] >= 1);
      CHECK(counts["val"] >= 1);
      CHECK(counts["test"] >= 1);
      // largest-remainder sizes when nothing had to be rebalanced
      if (n >= 20) {
        CHECK(std::abs(counts["train"] - 0.85 * n) <= 1.0);
        CHECK(std::abs(counts["val"] - 0.05 * n) <= 1.0);
        CHECK(std::abs(counts["test"] - 0.10 * n) <= 1.0);
      }
    }
  }
}

TEST_CASE("synth_generate produces the requested subjects and aligned pairs") {
  SynthConfig cfg;
  cfg.subjects = 7;
  cfg.utterances = 2;
  cfg.ticks = 12;
  cfg.seed = 3;
  const auto ds = synth_generate(cfg);
  CHECK(ds.items.size() == 14);
  CHECK(ds.manifest.entries.size() == 14);

  std::set<std::string> subjects;
  for (const auto& e : ds.manifest.entries) subjects.insert(e.subject);
  CHECK(subjects.size() == 7);
  CHECK(subjects.count("s1") == 1);
  CHECK(subjects.count("s7") == 1);

  for (const auto& item : ds.items) {
    CHECK(item.video.frames() == 12);
    CHECK(item.eeg.samples_per_channel() == 10 * 12 + 90);
    const auto feats = extract_features(item.eeg, cfg.window);
    CHECK(feats.rows == item.video.frames());
  }
}

TEST_CASE("synth_generate with zero noise stays in the latent subspace") {
  SynthConfig cfg;
  cfg.subjects = 1;
  cfg.utterances = 1;
  cfg.ticks = 48;
  cfg.latent_dim = 3;
  cfg.noise = 0.0;
  cfg.seed = 11;
  const auto ds = synth_generate(cfg);
  const auto& eeg = ds.items.front().eeg;

  // channel covariance has rank == latent_dim
  const int C = eeg.channel_count();
  const auto len = eeg.samples_per_channel();
  std::vector<double> cov(static_cast<std::size_t>(C) * C, 0.0);
  for (int i = 0; i < C; ++i)
    for (int j = i; j < C; ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < len; ++k)
        acc += eeg.channels[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
               eeg.channels[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      cov[static_cast<std::size_t>(i) * C + j] = acc;
      cov[static_cast<std::size_t>(j) * C + i] = acc;
    }
  const auto eig = symmetric_eig(cov, C);
  CHECK(eig.values[2] > 1e-8 * eig.values[0]);  // three live directions
  CHECK(std::abs(eig.values[3]) <= 1e-8 * eig.values[0]);  // and nothing else
}

TEST_CASE("synth_generate is bit-deterministic per seed") {
  SynthConfig cfg;
  cfg.subjects = 2;
  cfg.utterances = 2;
  cfg.ticks = 8;
  cfg.seed = 21;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg);
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].eeg.channels == b.items[i].eeg.channels);
    CHECK(a.items[i].video.pixels == b.items[i].video.pixels);
    CHECK(a.manifest.entries[i].split == b.manifest.entries[i].split);
  }
}

TEST_CASE("EEGR round-trip is bit identical") {
  EegRecording rec;
  rec.sample_rate = 1000;
  Rng rng(5);
  rec.channels.assign(3, std::vector<double>(40));
  for (auto& ch : rec.channels)
    for (auto& v : ch) v = static_cast<double>(static_cast<float>(uniform(rng, -5.0, 5.0)));

  const std::string path = temp_path("nf_test.eegr");
  save_eegr(rec, path);
  const auto loaded = load_eegr(path);
  CHECK(loaded.sample_rate == 1000);
  CHECK(loaded.channels == rec.channels);

  save_eegr(loaded, path + ".b");
  CHECK(slurp(path) == slurp(path + ".b"));
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".b");
}

TEST_CASE("FEAT round-trip and truncation error") {
  FeatureSequence seq;
  seq.rate = 100;
  seq.dim = 4;
  seq.rows = 6;
  Rng rng(6);
  for (int i = 0; i < 24; ++i)
    seq.data.push_back(static_cast<double>(static_cast<float>(uniform(rng, -2.0, 2.0))));

  const std::string path = temp_path("nf_test.feat");
  save_feat(seq, path);
  const auto loaded = load_feat(path);
  CHECK(loaded.dim == 4);
  CHECK(loaded.rows == 6);
  CHECK(loaded.rate == 100);
  CHECK(loaded.data == seq.data);

  // truncate the payload
  const auto bytes = slurp(path);
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  os.close();
  CHECK_THROWS_AS(load_feat(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("VIDG round-trip and magic check") {
  VideoSequence video;
  Rng rng(7);
  video.pixels.resize(3 * 100 * 100);
  for (auto& p : video.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 256));

  const std::string path = temp_path("nf_test.vidg");
  save_vidg(video, path);
  const auto loaded = load_vidg(path);
  CHECK(loaded.frames() == 3);
  CHECK(loaded.pixels == video.pixels);

  std::ofstream os(path, std::ios::binary);
  os << "JUNKdata";
  os.close();
  CHECK_THROWS_AS(load_vidg(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("PGM export writes the exact header layout") {
  VideoSequence video;
  video.pixels.assign(100 * 100, 128);  // one mid-gray frame
  const std::string dir = temp_path("nf_pgm_dir");
  export_pgm_frames(video, dir);
  const auto bytes = slurp((std::filesystem::path(dir) / "frame_000000.pgm").string());
  const std::string header = "P5\n100 100\n255\n";
  REQUIRE(bytes.size() == header.size() + 10000);
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  for (std::size_t i = header.size(); i < bytes.size(); ++i)
    CHECK(static_cast<unsigned char>(bytes[i]) == 128);

  int w = 0, h = 0;
  const auto pixels = load_pgm((std::filesystem::path(dir) / "frame_000000.pgm").string(), w, h);
  CHECK(w == 100);
  CHECK(h == 100);
  CHECK(pixels.size() == 10000);
  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest JSON round-trip and validation") {
  auto manifest = split_dataset(fake_manifest(10), {0.85, 0.05, 0.10}, 99);
  const std::string path = temp_path("nf_manifest.json");
  save_manifest(manifest, path);
  const auto loaded = load_manifest(path);
  CHECK(loaded.seed == 99);
  CHECK(loaded.ratios == manifest.ratios);
  REQUIRE(loaded.entries.size() == manifest.entries.size());
  for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
    CHECK(loaded.entries[i].subject == manifest.entries[i].subject);
    CHECK(loaded.entries[i].split == manifest.entries[i].split);
  }

  std::ofstream os(path);
  os << "{\"seed\": 1}";
  os.close();
  CHECK_THROWS_AS(load_manifest(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("KPCA model file round-trip is bit identical") {
  Rng rng(8);
  std::vector<double> X;
  GaussianDraw draw;
  for (int i = 0; i < 20 * 5; ++i) X.push_back(draw(rng));
  const auto model = kpca_fit(X, 20, 5, 3, KernelConfig{});

  const std::string path = temp_path("nf_test.kpca");
  save_kpca(model, path);
  const auto loaded = load_kpca(path);
  CHECK(loaded.input_dim == model.input_dim);
  CHECK(loaded.eigenvalues == model.eigenvalues);
  CHECK(loaded.coefficient_matrix == model.coefficient_matrix);
  CHECK(loaded.kernel.degree == model.kernel.degree);

  save_kpca(loaded, path + ".b");
  CHECK(slurp(path) == slurp(path + ".b"));

  // projections survive the round trip exactly
  std::vector<double> probe(5, 0.3);
  CHECK(kpca_transform(model, probe) == kpca_transform(loaded, probe));

  std::ofstream os(path, std::ios::binary);
  os << "GARBAGE!";
  os.close();
  CHECK_THROWS_AS(load_kpca(path), FormatError);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".b");
}

TEST_CASE("loaders reject corrupted magic bytes") {
  const std::string path = temp_path("nf_bad_magic.bin");
  std::ofstream os(path, std::ios::binary);
  os << "XXXXrest-of-file-payload";
  os.close();
  CHECK_THROWS_AS(load_eegr(path), FormatError);
  CHECK_THROWS_AS(load_feat(path), FormatError);
  CHECK_THROWS_AS(load_vidg(path), FormatError);
  CHECK_THROWS_AS(load_kpca(path), FormatError);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
}
