#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "neuroframe/eval.hpp"
#include "neuroframe/io.hpp"

using namespace neuroframe;
namespace fs = std::filesystem;

namespace {

#ifndef NEUROFRAME_CLI_PATH
#define NEUROFRAME_CLI_PATH "neuroframe"
#endif

int run(const std::string& args) {
  const std::string cmd = std::string(NEUROFRAME_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* sub) const { return (path / sub).string(); }
};

}  // namespace

TEST_CASE("cli: help exits 0, usage errors exit 1") {
  CHECK(run("--help") == 0);
  CHECK(run("train --help") == 0);
  CHECK(run("") == 1);                          // missing subcommand
  CHECK(run("train e2v --out x.nnck") == 1);    // missing --manifest
  CHECK(run("train sideways --manifest m --out x") == 1);
  CHECK(run("frobnicate") == 1);
}

TEST_CASE("cli: format errors exit 2, numeric failures exit 3") {
  TempDir dir("nf_cli_err");
  const std::string junk = dir / "junk.eegr";
  std::ofstream os(junk, std::ios::binary);
  os << "not a real file";
  os.close();
  CHECK(run("filter --in " + junk + " --out " + (dir / "out.eegr")) == 2);

  // constant features make the centered Gram rank deficient
  FeatureSequence flat;
  flat.rate = 100;
  flat.dim = 4;
  flat.rows = 40;
  flat.data.assign(160, 1.0);
  save_feat(flat, dir / "flat.feat");
  CHECK(run("kpca fit --in " + (dir / "flat.feat") + " --dim 3 --out " + (dir / "m.kpca")) == 3);
}

TEST_CASE("cli: synth is idempotent for a fixed seed") {
  TempDir dir("nf_cli_synth");
  CHECK(run("synth --seed 4 --subjects 2 --utterances 2 --ticks 8 --out " + (dir / "a")) == 0);
  CHECK(run("synth --seed 4 --subjects 2 --utterances 2 --ticks 8 --out " + (dir / "b")) == 0);
  for (const char* name : {"manifest.json", "s1_u000.eegr", "s2_u001.vidg"}) {
    const auto a = slurp((fs::path(dir / "a") / name).string());
    CHECK(!a.empty());
    CHECK(a == slurp((fs::path(dir / "b") / name).string()));
  }
}

TEST_CASE("cli: full pipeline runs end to end on a tiny dataset") {
  TempDir dir("nf_cli_e2e");
  const std::string data = dir / "data";
  REQUIRE(run("synth --seed 1 --subjects 2 --utterances 4 --ticks 16 --out " + data) == 0);

  const auto manifest = load_manifest((fs::path(data) / "manifest.json").string());
  REQUIRE(manifest.entries.size() == 8);
  const std::string work = dir / "work";
  const std::string red = dir / "red";
  fs::create_directories(work);
  fs::create_directories(red);

  for (const auto& e : manifest.entries) {
    const std::string in = (fs::path(data) / e.eeg).string();
    const std::string filtered = (fs::path(work) / e.eeg).string();
    REQUIRE(run("filter --in " + in + " --out " + filtered + " --band 0.1:70 --notch 60") == 0);
    const std::string feat = (fs::path(work) / (fs::path(e.eeg).stem().string() + ".feat")).string();
    REQUIRE(run("features --in " + filtered + " --out " + feat) == 0);
  }

  const std::string model = dir / "kpca.model";
  REQUIRE(run("kpca fit --manifest " + (fs::path(data) / "manifest.json").string() +
              " --feat-dir " + work + " --split train --dim 30 --cap 200 --out " + model +
              " --evr " + (dir / "evr.csv")) == 0);
  {
    std::ifstream evr(dir / "evr.csv");
    std::string line;
    std::getline(evr, line);
    CHECK(line == "component,cumulative_fraction");
    int evr_rows = 0;
    double last = 0.0;
    while (std::getline(evr, line))
      if (!line.empty()) {
        ++evr_rows;
        const double frac = std::stod(line.substr(line.find(',') + 1));
        CHECK(frac >= last);  // cumulative fractions never decrease
        last = frac;
      }
    CHECK(evr_rows == 30);
    CHECK(last <= 1.0 + 1e-12);
  }
  for (const auto& e : manifest.entries) {
    const std::string stem = fs::path(e.eeg).stem().string() + ".feat";
    REQUIRE(run("kpca transform --model " + model + " --in " + (fs::path(work) / stem).string() +
                " --out " + (fs::path(red) / stem).string()) == 0);
  }

  // per-subject fitting is one flag away
  CHECK(run("kpca fit --manifest " + (fs::path(data) / "manifest.json").string() + " --feat-dir " +
            work + " --split \"\" --subject s1 --dim 10 --cap 200 --out " +
            (dir / "kpca_s1.model")) == 0);

  const std::string mpath = (fs::path(data) / "manifest.json").string();
  REQUIRE(run("train e2v --manifest " + mpath + " --feat-dir " + red +
              " --epochs 2 --batch 4 --seed 1 --out " + (dir / "e2v.nnck") + " --log " +
              (dir / "e2v.csv") + " --samples " + (dir / "samples")) == 0);
  CHECK(fs::exists(fs::path(dir / "samples") / "epoch_0000.pgm"));
  CHECK(fs::exists(fs::path(dir / "samples") / "epoch_0001.pgm"));
  REQUIRE(run("train v2e --manifest " + mpath + " --feat-dir " + red +
              " --epochs 2 --batch 4 --seed 2 --out " + (dir / "v2e.nnck") + " --log " +
              (dir / "v2e.csv")) == 0);

  // predict both directions on the first utterance
  const std::string feat0 = (fs::path(red) / "s1_u000.feat").string();
  REQUIRE(run("predict e2v --ckpt " + (dir / "e2v.nnck") + " --in " + feat0 + " --out " +
              (dir / "frames")) == 0);
  CHECK(fs::exists(fs::path(dir / "frames") / "frame_000000.pgm"));
  REQUIRE(run("predict v2e --ckpt " + (dir / "v2e.nnck") + " --in " +
              (fs::path(data) / "s1_u000.vidg").string() + " --out " + (dir / "pred")) == 0);
  CHECK(fs::exists(fs::path(dir / "pred") / "predicted.feat"));

  REQUIRE(run("eval --manifest " + mpath + " --feat-dir " + red + " --ckpt-e2v " +
              (dir / "e2v.nnck") + " --ckpt-v2e " + (dir / "v2e.nnck") + " --report " +
              (dir / "report.csv") + " --svg " + (dir / "report.svg")) == 0);
  const auto rows = load_report_csv(dir / "report.csv");
  CHECK(rows.size() >= 2);  // at least one subject in test, two directions
  CHECK(fs::exists(dir / "report.svg"));

  // training log has the expected header and epoch count
  std::ifstream is(dir / "e2v.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,train_mse,val_mse");
  int data_lines = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == 2);
}
