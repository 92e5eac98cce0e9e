// neuroframe command line: synthetic data, filtering, feature extraction,
// kernel PCA, model training and evaluation, chained through files.
//
// Exit codes: 0 success, 1 usage error, 2 format error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuroframe/data.hpp"
#include "neuroframe/eval.hpp"
#include "neuroframe/features.hpp"
#include "neuroframe/io.hpp"
#include "neuroframe/kpca.hpp"
#include "neuroframe/models.hpp"
#include "neuroframe/pipeline.hpp"
#include "neuroframe/signal.hpp"

namespace fs = std::filesystem;
using namespace neuroframe;

namespace {

struct SynthArgs {
  std::uint64_t seed = 1;
  int subjects = 7;
  int utterances = 10;
  int ticks = 64;
  int latent = 3;
  double noise = 0.4;
  int channels = 31;
  std::string out_dir;
};

int run_synth(const SynthArgs& args) {
  SynthConfig cfg;
  cfg.seed = args.seed;
  cfg.subjects = args.subjects;
  cfg.utterances = args.utterances;
  cfg.ticks = args.ticks;
  cfg.latent_dim = args.latent;
  cfg.noise = args.noise;
  cfg.channels = args.channels;
  const SynthDataset ds = synth_generate(cfg);

  fs::create_directories(args.out_dir);
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& entry = ds.manifest.entries[i];
    save_eegr(ds.items[i].eeg, (fs::path(args.out_dir) / entry.eeg).string());
    save_vidg(ds.items[i].video, (fs::path(args.out_dir) / entry.video).string());
  }
  save_manifest(ds.manifest, (fs::path(args.out_dir) / "manifest.json").string());
  std::printf("wrote %zu utterances (%d subjects) to %s\n", ds.items.size(), cfg.subjects,
              args.out_dir.c_str());
  return 0;
}

struct FilterArgs {
  std::string in_path, out_path;
  std::string band = "0.1:70";
  int order = 4;
  double notch = 60.0;
  double notch_q = 30.0;
  int csv_rate = 1000;
};

int run_filter(const FilterArgs& args) {
  EegRecording rec = fs::path(args.in_path).extension() == ".csv"
                         ? load_eeg_csv(args.in_path, args.csv_rate)
                         : load_eegr(args.in_path);
  const double fs_hz = static_cast<double>(rec.sample_rate);

  const auto colon = args.band.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("--band expects LOW:HIGH, e.g. 0.1:70");
  const double lo = std::stod(args.band.substr(0, colon));
  const double hi = std::stod(args.band.substr(colon + 1));

  rec = apply_filter(design_bandpass(lo, hi, args.order, fs_hz), rec);
  if (args.notch > 0.0) rec = apply_filter(design_notch(args.notch, args.notch_q, fs_hz), rec);
  save_eegr(rec, args.out_path);
  std::printf("filtered %d channels, %lld samples -> %s\n", rec.channel_count(),
              static_cast<long long>(rec.samples_per_channel()), args.out_path.c_str());
  return 0;
}

struct FeaturesArgs {
  std::string in_path, out_path;
  int window = 100;
  int hop = 10;
  int fft = 128;
};

int run_features(const FeaturesArgs& args) {
  const EegRecording rec = load_eegr(args.in_path);
  WindowConfig cfg;
  cfg.window_len = args.window;
  cfg.hop = args.hop;
  cfg.fft_len = args.fft;
  const FeatureSequence seq = extract_features(rec, cfg);
  if (fs::path(args.out_path).extension() == ".csv")
    save_feat_csv(seq, args.out_path);
  else
    save_feat(seq, args.out_path);
  std::printf("extracted %lld rows x %d features at %d Hz -> %s\n",
              static_cast<long long>(seq.rows), seq.dim, seq.rate, args.out_path.c_str());
  return 0;
}

struct KpcaFitArgs {
  std::vector<std::string> inputs;
  std::string manifest_path, feat_dir, split = "train", subject;
  int dim = 30;
  int degree = 3;
  double gamma = 0.0;  // auto: 1/D
  double offset = 1.0;
  int cap = 2000;
  std::string out_path, evr_path;
};

int run_kpca_fit(const KpcaFitArgs& args) {
  std::vector<std::string> files = args.inputs;
  if (files.empty()) {
    if (args.manifest_path.empty())
      throw std::invalid_argument("kpca fit: give --in FEAT... or --manifest");
    const auto manifest = load_manifest(args.manifest_path);
    const std::string dir = fs::path(args.manifest_path).parent_path().string();
    for (const auto& e : manifest.entries) {
      if (!args.split.empty() && e.split != args.split) continue;
      if (!args.subject.empty() && e.subject != args.subject) continue;
      files.push_back(resolve_feature_path(e, dir, args.feat_dir));
    }
  }
  if (files.empty()) throw std::invalid_argument("kpca fit: no input feature files");

  std::vector<double> rows;
  int dim = -1;
  std::int64_t count = 0;
  for (const auto& f : files) {
    const FeatureSequence seq = load_feat(f);
    if (dim < 0) dim = seq.dim;
    if (seq.dim != dim) throw FormatError("kpca fit: feature dimensions differ across inputs");
    rows.insert(rows.end(), seq.data.begin(), seq.data.end());
    count += seq.rows;
  }

  KernelConfig kernel;
  kernel.degree = args.degree;
  kernel.gamma = args.gamma;
  kernel.offset = args.offset;
  const KpcaModel model =
      kpca_fit(rows, static_cast<int>(count), dim, args.dim, kernel, args.cap);
  save_kpca(model, args.out_path);
  std::printf("kpca: fitted %d -> %d dims on %lld rows (gram %d x %d) -> %s\n", dim, model.out_dim,
              static_cast<long long>(count), model.train_rows, model.train_rows,
              args.out_path.c_str());

  if (!args.evr_path.empty()) {
    const auto cev = cumulative_explained_variance(model);
    std::ofstream os(args.evr_path);
    if (!os) throw FormatError("cannot open for writing: " + args.evr_path);
    os << "component,cumulative_fraction\n";
    char buf[64];
    for (std::size_t i = 0; i < cev.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i + 1, cev[i]);
      os << buf;
    }
  }
  return 0;
}

struct KpcaTransformArgs {
  std::string model_path, in_path, out_path;
};

int run_kpca_transform(const KpcaTransformArgs& args) {
  const KpcaModel model = load_kpca(args.model_path);
  const FeatureSequence in = load_feat(args.in_path);
  const FeatureSequence out = kpca_transform_rows(model, in);
  save_feat(out, args.out_path);
  std::printf("kpca: %lld rows %d -> %d dims -> %s\n", static_cast<long long>(in.rows), in.dim,
              out.dim, args.out_path.c_str());
  return 0;
}

struct TrainArgs {
  std::string direction;
  std::string manifest_path, feat_dir;
  int epochs = 50;
  int batch = 100;
  double val_split = 0.05;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int chunk = 16;
  std::string ckpt_path, log_path, samples_dir;
};

int run_train(const TrainArgs& args) {
  const auto manifest = load_manifest(args.manifest_path);
  const std::string dir = fs::path(args.manifest_path).parent_path().string();
  const auto entries = load_entries(manifest, dir, args.feat_dir);
  const FeatureScaler scaler = fit_scaler_on_split(entries, "train");

  // the pool excludes test data; train() re-derives the validation fraction
  std::vector<LoadedEntry> pool;
  for (const auto& e : entries)
    if (e.meta.split != "test") pool.push_back(e);
  auto pairs = make_pairs(pool, "", args.direction, scaler);

  Model model = build_model(args.direction, args.seed);
  TrainConfig cfg;
  cfg.epochs = args.epochs;
  cfg.batch_size = args.batch;
  cfg.val_split = args.val_split;
  cfg.lr = args.lr;
  cfg.seed = args.seed;
  cfg.chunk_ticks = args.chunk;

  SampleHook hook;
  if (!args.samples_dir.empty()) {
    if (args.direction != "e2v") {
      std::fprintf(stderr, "note: --samples exports frames and is only meaningful for e2v\n");
    } else {
      fs::create_directories(args.samples_dir);
      const Tensor probe = with_batch_axis(pairs.front().input);
      const std::string sample_dir = args.samples_dir;
      hook = [probe, sample_dir](int epoch, Model& m) {
        Tensor pred = m.forward(probe);
        const VideoSequence video = tensor_to_video(
            pred.reshaped({pred.shape[1], pred.shape[2], pred.shape[3]}));
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04d.pgm", epoch);
        save_pgm(video.frame(0), video.width, video.height,
                 (fs::path(sample_dir) / name).string());
      };
    }
  }

  TrainingLog log = train(model, pairs, cfg, hook);
  log.checkpoint_ref = args.ckpt_path;
  if (!args.log_path.empty()) save_training_log_csv(log, args.log_path);

  nlohmann::json meta{{"arch", args.direction},
                      {"seed", args.seed},
                      {"epoch", args.epochs},
                      {"loss_ref", args.log_path},
                      {"scaler", scaler.to_json()}};
  save_checkpoint(model, meta, args.ckpt_path);
  std::printf("trained %s for %d epochs on %d sequences (%d chunks), final train mse %.6g, "
              "val mse %.6g -> %s\n",
              args.direction.c_str(), args.epochs, log.train_sequences, log.train_chunks,
              log.epochs.back().train_mse, log.epochs.back().val_mse, args.ckpt_path.c_str());
  return 0;
}

struct PredictArgs {
  std::string direction;
  std::string ckpt_path, in_path, out_dir;
};

int run_predict(const PredictArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.ckpt_path);
  if (ckpt.model.arch != args.direction)
    throw std::invalid_argument("checkpoint architecture is " + ckpt.model.arch +
                                ", requested " + args.direction);
  const FeatureScaler scaler = FeatureScaler::from_json(ckpt.metadata.at("scaler"));
  fs::create_directories(args.out_dir);

  if (args.direction == "e2v") {
    const FeatureSequence feats = load_feat(args.in_path);
    const Tensor input = with_batch_axis(features_to_tensor(feats, scaler));
    Tensor pred = ckpt.model.forward(input);
    const VideoSequence video =
        tensor_to_video(pred.reshaped({pred.shape[1], pred.shape[2], pred.shape[3]}));
    export_pgm_frames(video, args.out_dir);
    std::printf("predicted %d frames -> %s\n", video.frames(), args.out_dir.c_str());
  } else {
    const VideoSequence video = load_vidg(args.in_path);
    const Tensor input = with_batch_axis(video_to_input_tensor(video));
    Tensor pred = ckpt.model.forward(input);
    const FeatureSequence feats =
        tensor_to_features(pred.reshaped({pred.shape[1], pred.shape[2]}), scaler, 100);
    const std::string out = (fs::path(args.out_dir) / "predicted.feat").string();
    save_feat(feats, out);
    std::printf("predicted %lld feature rows -> %s\n", static_cast<long long>(feats.rows),
                out.c_str());
  }
  return 0;
}

struct EvalArgs {
  std::string manifest_path, feat_dir;
  std::string ckpt_e2v, ckpt_v2e;
  std::string report_path, svg_path;
};

int run_eval(const EvalArgs& args) {
  const auto manifest = load_manifest(args.manifest_path);
  const std::string dir = fs::path(args.manifest_path).parent_path().string();
  const auto entries = load_entries(manifest, dir, args.feat_dir);

  std::vector<SubjectResult> rows;
  for (const std::string direction : {"e2v", "v2e"}) {
    const std::string& path = direction == "e2v" ? args.ckpt_e2v : args.ckpt_v2e;
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.model.arch != direction)
      throw std::invalid_argument("checkpoint " + path + " is not a " + direction + " model");
    const FeatureScaler scaler = FeatureScaler::from_json(ckpt.metadata.at("scaler"));
    const DirectionReport report = evaluate_direction(ckpt.model, entries, scaler, direction);
    rows.insert(rows.end(), report.rows.begin(), report.rows.end());
    std::printf("%s: pooled test rmse %.6g (mean baseline %.6g)\n", direction.c_str(),
                report.pooled_model_rmse, report.pooled_baseline_rmse);
    if (direction == "v2e")
      std::printf("v2e (standardized space): rmse %.6g (baseline %.6g)\n",
                  report.std_space_model_rmse, report.std_space_baseline_rmse);
  }
  save_report_csv(rows, args.report_path);
  if (!args.svg_path.empty()) save_report_svg(rows, args.svg_path);
  std::printf("report: %zu rows -> %s\n", rows.size(), args.report_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neuroframe: EEG-to-video / video-to-EEG modelling pipeline.\n"
               "Set NEUROFRAME_THREADS to cap worker threads."};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  cmd_synth->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  cmd_synth->add_option("--subjects", synth.subjects, "Subject count")->capture_default_str();
  cmd_synth->add_option("--utterances", synth.utterances, "Utterances per subject")->capture_default_str();
  cmd_synth->add_option("--ticks", synth.ticks, "Frames per utterance (100 fps)")->capture_default_str();
  cmd_synth->add_option("--latent", synth.latent, "Latent trajectory dimension")->capture_default_str();
  cmd_synth->add_option("--noise", synth.noise, "EEG noise level")->capture_default_str();
  cmd_synth->add_option("--channels", synth.channels, "EEG channel count")->capture_default_str();
  cmd_synth->add_option("--out", synth.out_dir, "Output directory")->required();

  FilterArgs filter;
  auto* cmd_filter = app.add_subcommand("filter", "Band-pass and notch filter an EEG recording");
  cmd_filter->add_option("--in", filter.in_path, "Input EEGR (or CSV) file")->required();
  cmd_filter->add_option("--out", filter.out_path, "Output EEGR file")->required();
  cmd_filter->add_option("--band", filter.band, "Band-pass cutoffs LOW:HIGH in Hz")->capture_default_str();
  cmd_filter->add_option("--order", filter.order, "Band-pass order (even)")->capture_default_str();
  cmd_filter->add_option("--notch", filter.notch, "Notch frequency in Hz (0 disables)")->capture_default_str();
  cmd_filter->add_option("--notch-q", filter.notch_q, "Notch quality factor")->capture_default_str();
  cmd_filter->add_option("--rate", filter.csv_rate, "Sample rate for CSV import")->capture_default_str();

  FeaturesArgs features_args;
  auto* cmd_features = app.add_subcommand("features", "Extract windowed statistical features");
  cmd_features->add_option("--in", features_args.in_path, "Input EEGR file")->required();
  cmd_features->add_option("--out", features_args.out_path, "Output FEAT (or .csv) file")->required();
  cmd_features->add_option("--window", features_args.window, "Window length in samples")->capture_default_str();
  cmd_features->add_option("--hop", features_args.hop, "Hop in samples")->capture_default_str();
  cmd_features->add_option("--fft", features_args.fft, "Periodogram length (power of two)")->capture_default_str();

  auto* cmd_kpca = app.add_subcommand("kpca", "Kernel PCA fitting and projection");
  cmd_kpca->require_subcommand(1);

  KpcaFitArgs kfit;
  auto* cmd_kfit = cmd_kpca->add_subcommand("fit", "Fit a polynomial-kernel PCA model");
  cmd_kfit->add_option("--in", kfit.inputs, "Input FEAT files");
  cmd_kfit->add_option("--manifest", kfit.manifest_path, "Manifest (alternative to --in)");
  cmd_kfit->add_option("--feat-dir", kfit.feat_dir, "Feature directory for manifest entries");
  cmd_kfit->add_option("--split", kfit.split, "Manifest split to fit on")->capture_default_str();
  cmd_kfit->add_option("--subject", kfit.subject, "Fit on a single subject's entries");
  cmd_kfit->add_option("--dim", kfit.dim, "Output dimension")->capture_default_str();
  cmd_kfit->add_option("--degree", kfit.degree, "Polynomial degree")->capture_default_str();
  cmd_kfit->add_option("--gamma", kfit.gamma, "Kernel gain (0 = 1/input_dim)")->capture_default_str();
  cmd_kfit->add_option("--offset", kfit.offset, "Kernel offset")->capture_default_str();
  cmd_kfit->add_option("--cap", kfit.cap, "Training-row cap for the Gram matrix")->capture_default_str();
  cmd_kfit->add_option("--out", kfit.out_path, "Output model file")->required();
  cmd_kfit->add_option("--evr", kfit.evr_path, "Cumulative explained variance CSV");

  KpcaTransformArgs ktrans;
  auto* cmd_ktrans = cmd_kpca->add_subcommand("transform", "Project features through a model");
  cmd_ktrans->add_option("--model", ktrans.model_path, "KPCA model file")->required();
  cmd_ktrans->add_option("--in", ktrans.in_path, "Input FEAT file")->required();
  cmd_ktrans->add_option("--out", ktrans.out_path, "Output FEAT file")->required();

  TrainArgs train_args;
  auto* cmd_train = app.add_subcommand("train", "Train a model on a manifest");
  cmd_train->add_option("direction", train_args.direction, "e2v or v2e")
      ->required()
      ->check(CLI::IsMember({"e2v", "v2e"}));
  cmd_train->add_option("--manifest", train_args.manifest_path, "Dataset manifest")->required();
  cmd_train->add_option("--feat-dir", train_args.feat_dir, "Directory of reduced FEAT files");
  cmd_train->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str();
  cmd_train->add_option("--batch", train_args.batch, "Batch size")->capture_default_str();
  cmd_train->add_option("--val-split", train_args.val_split, "Validation fraction")->capture_default_str();
  cmd_train->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  cmd_train->add_option("--seed", train_args.seed, "RNG seed")->capture_default_str();
  cmd_train->add_option("--chunk", train_args.chunk, "Chunk length in ticks")->capture_default_str();
  cmd_train->add_option("--out", train_args.ckpt_path, "Output checkpoint")->required();
  cmd_train->add_option("--log", train_args.log_path, "Training log CSV");
  cmd_train->add_option("--samples", train_args.samples_dir, "Per-epoch sample frame directory");

  PredictArgs predict_args;
  auto* cmd_predict = app.add_subcommand("predict", "Run a checkpoint on new data");
  cmd_predict->add_option("direction", predict_args.direction, "e2v or v2e")
      ->required()
      ->check(CLI::IsMember({"e2v", "v2e"}));
  cmd_predict->add_option("--ckpt", predict_args.ckpt_path, "Checkpoint file")->required();
  cmd_predict->add_option("--in", predict_args.in_path, "Input FEAT (e2v) or VIDG (v2e)")->required();
  cmd_predict->add_option("--out", predict_args.out_dir, "Output directory")->required();

  EvalArgs eval_args;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate checkpoints on the test split");
  cmd_eval->add_option("--manifest", eval_args.manifest_path, "Dataset manifest")->required();
  cmd_eval->add_option("--feat-dir", eval_args.feat_dir, "Directory of reduced FEAT files");
  cmd_eval->add_option("--ckpt-e2v", eval_args.ckpt_e2v, "EEG-to-video checkpoint")->required();
  cmd_eval->add_option("--ckpt-v2e", eval_args.ckpt_v2e, "Video-to-EEG checkpoint")->required();
  cmd_eval->add_option("--report", eval_args.report_path, "Report CSV path")->required();
  cmd_eval->add_option("--svg", eval_args.svg_path, "Optional bar-chart SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_synth)) return run_synth(synth);
    if (app.got_subcommand(cmd_filter)) return run_filter(filter);
    if (app.got_subcommand(cmd_features)) return run_features(features_args);
    if (app.got_subcommand(cmd_kpca)) {
      if (cmd_kpca->got_subcommand(cmd_kfit)) return run_kpca_fit(kfit);
      if (cmd_kpca->got_subcommand(cmd_ktrans)) return run_kpca_transform(ktrans);
    }
    if (app.got_subcommand(cmd_train)) return run_train(train_args);
    if (app.got_subcommand(cmd_predict)) return run_predict(predict_args);
    if (app.got_subcommand(cmd_eval)) return run_eval(eval_args);
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
