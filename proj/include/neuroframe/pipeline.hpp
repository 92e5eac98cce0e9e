#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroframe/data.hpp"
#include "neuroframe/eval.hpp"
#include "neuroframe/features.hpp"
#include "neuroframe/io.hpp"
#include "neuroframe/models.hpp"

namespace neuroframe {

// Per-component standardization of the reduced feature space. Models train
// against standardized features; files keep raw projections, so the scaler
// travels inside checkpoint metadata.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stdev;

  static FeatureScaler fit(const std::vector<const FeatureSequence*>& sequences) {
    if (sequences.empty()) throw std::invalid_argument("scaler: empty training set");
    const int dim = sequences.front()->dim;
    FeatureScaler s;
    s.mean.assign(static_cast<std::size_t>(dim), 0.0);
    s.stdev.assign(static_cast<std::size_t>(dim), 0.0);
    std::int64_t rows = 0;
    for (const auto* seq : sequences) {
      if (seq->dim != dim) throw std::invalid_argument("scaler: dimension mismatch");
      for (std::int64_t r = 0; r < seq->rows; ++r)
        for (int d = 0; d < dim; ++d) s.mean[static_cast<std::size_t>(d)] += seq->at(r, d);
      rows += seq->rows;
    }
    for (auto& m : s.mean) m /= static_cast<double>(rows);
    for (const auto* seq : sequences)
      for (std::int64_t r = 0; r < seq->rows; ++r)
        for (int d = 0; d < dim; ++d) {
          const double delta = seq->at(r, d) - s.mean[static_cast<std::size_t>(d)];
          s.stdev[static_cast<std::size_t>(d)] += delta * delta;
        }
    for (auto& v : s.stdev) {
      v = std::sqrt(v / static_cast<double>(rows));
      if (v < 1e-12) v = 1.0;
    }
    return s;
  }

  int dim() const { return static_cast<int>(mean.size()); }

  nlohmann::json to_json() const { return {{"mean", mean}, {"stdev", stdev}}; }

  static FeatureScaler from_json(const nlohmann::json& j) {
    FeatureScaler s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stdev = j.at("stdev").get<std::vector<double>>();
    if (s.mean.size() != s.stdev.size() || s.mean.empty())
      throw FormatError("scaler: malformed mean/stdev arrays");
    return s;
  }
};

// [T, dim] float tensor of standardized features.
inline Tensor features_to_tensor(const FeatureSequence& seq, const FeatureScaler& scaler) {
  if (seq.dim != scaler.dim()) throw std::invalid_argument("features_to_tensor: dim mismatch");
  Tensor out({static_cast<int>(seq.rows), seq.dim});
  for (std::int64_t r = 0; r < seq.rows; ++r)
    for (int d = 0; d < seq.dim; ++d)
      out.data[static_cast<std::size_t>(r * seq.dim + d)] = static_cast<float>(
          (seq.at(r, d) - scaler.mean[static_cast<std::size_t>(d)]) / scaler.stdev[static_cast<std::size_t>(d)]);
  return out;
}

// Standardized prediction tensor ([T,dim] or [1,T,dim]) back to raw
// projection space.
inline FeatureSequence tensor_to_features(const Tensor& t, const FeatureScaler& scaler, int rate) {
  const int dim = t.shape.back();
  if (dim != scaler.dim()) throw std::invalid_argument("tensor_to_features: dim mismatch");
  FeatureSequence seq;
  seq.rate = rate;
  seq.dim = dim;
  seq.rows = t.size() / dim;
  seq.data.resize(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const int d = static_cast<int>(i % dim);
    seq.data[static_cast<std::size_t>(i)] =
        static_cast<double>(t.data[static_cast<std::size_t>(i)]) * scaler.stdev[static_cast<std::size_t>(d)] +
        scaler.mean[static_cast<std::size_t>(d)];
  }
  for (int d = 0; d < dim; ++d) seq.names.push_back("kpc" + std::to_string(d));
  return seq;
}

// Video used as model input is scaled to [0,1]; video used as a training
// target stays in raw 0..255 intensity, which is the reported metric space.
inline Tensor video_to_input_tensor(const VideoSequence& v) {
  Tensor out({v.frames(), v.height, v.width});
  for (std::size_t i = 0; i < v.pixels.size(); ++i)
    out.data[i] = static_cast<float>(v.pixels[i]) / 255.0f;
  return out;
}

inline Tensor video_to_target_tensor(const VideoSequence& v) {
  Tensor out({v.frames(), v.height, v.width});
  for (std::size_t i = 0; i < v.pixels.size(); ++i) out.data[i] = static_cast<float>(v.pixels[i]);
  return out;
}

// Raw prediction ([T,H,W] or [1,T,H,W]) to displayable frames; the clamp to
// 0..255 happens only here, at export.
inline VideoSequence tensor_to_video(const Tensor& t, int fps = 100) {
  VideoSequence v;
  v.fps = fps;
  const int w = t.shape.back();
  const int h = t.shape[static_cast<std::size_t>(t.rank() - 2)];
  v.height = h;
  v.width = w;
  v.pixels.resize(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const float raw = t.data[static_cast<std::size_t>(i)];
    const float clamped = raw < 0.0f ? 0.0f : (raw > 255.0f ? 255.0f : raw);
    v.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(clamped));
  }
  return v;
}

struct LoadedEntry {
  ManifestEntry meta;
  FeatureSequence features;  // reduced (raw projection space)
  VideoSequence video;
};

// Entry paths resolve relative to the manifest directory; when feat_dir is
// given, the feature file is feat_dir/<eeg stem>.feat.
inline std::string resolve_feature_path(const ManifestEntry& e, const std::string& manifest_dir,
                                        const std::string& feat_dir) {
  namespace fs = std::filesystem;
  if (!feat_dir.empty())
    return (fs::path(feat_dir) / fs::path(e.eeg).stem().concat(".feat")).string();
  fs::path p(e.eeg);
  return p.is_absolute() ? p.string() : (fs::path(manifest_dir) / p).string();
}

inline std::vector<LoadedEntry> load_entries(const DatasetManifest& manifest,
                                             const std::string& manifest_dir,
                                             const std::string& feat_dir) {
  namespace fs = std::filesystem;
  std::vector<LoadedEntry> out;
  for (const auto& e : manifest.entries) {
    LoadedEntry le;
    le.meta = e;
    le.features = load_feat(resolve_feature_path(e, manifest_dir, feat_dir));
    fs::path vp(e.video);
    le.video = load_vidg(vp.is_absolute() ? vp.string() : (fs::path(manifest_dir) / vp).string());
    if (le.features.rows != le.video.frames())
      throw FormatError("manifest entry " + e.subject + "/" + e.utterance +
                        ": feature rows != video frames");
    out.push_back(std::move(le));
  }
  return out;
}

inline FeatureScaler fit_scaler_on_split(const std::vector<LoadedEntry>& entries,
                                         const std::string& split) {
  std::vector<const FeatureSequence*> seqs;
  for (const auto& e : entries)
    if (e.meta.split == split) seqs.push_back(&e.features);
  return FeatureScaler::fit(seqs);
}

inline std::vector<TrainPair> make_pairs(const std::vector<LoadedEntry>& entries,
                                         const std::string& split, const std::string& direction,
                                         const FeatureScaler& scaler) {
  std::vector<TrainPair> pairs;
  for (const auto& e : entries) {
    if (!split.empty() && e.meta.split != split) continue;
    TrainPair p;
    if (direction == "e2v") {
      p.input = features_to_tensor(e.features, scaler);
      p.target = video_to_target_tensor(e.video);
    } else if (direction == "v2e") {
      p.input = video_to_input_tensor(e.video);
      p.target = features_to_tensor(e.features, scaler);
    } else {
      throw std::invalid_argument("make_pairs: direction must be e2v or v2e");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// Adds a batch axis: [T, ...] -> [1, T, ...]
inline Tensor with_batch_axis(const Tensor& t) {
  std::vector<int> shape{1};
  shape.insert(shape.end(), t.shape.begin(), t.shape.end());
  return t.reshaped(shape);
}

struct DirectionReport {
  std::vector<SubjectResult> rows;    // primary metric space per subject
  double pooled_model_rmse = 0.0;     // across all test entries
  double pooled_baseline_rmse = 0.0;
  // v2e only: supplementary RMSE in the standardized training space
  double std_space_model_rmse = 0.0;
  double std_space_baseline_rmse = 0.0;
};

// Per-subject test RMSE against the train-split mean baseline. e2v is scored
// in raw 0..255 pixel space; v2e in raw projection space, with the
// standardized-space numbers reported alongside.
inline DirectionReport evaluate_direction(Model& model, const std::vector<LoadedEntry>& entries,
                                          const FeatureScaler& scaler, const std::string& direction) {
  DirectionReport report;
  std::vector<Tensor> train_targets_raw;
  std::map<std::string, std::vector<Tensor>> test_pred_raw, test_truth_raw;
  std::vector<Tensor> all_pred_std, all_truth_std, train_targets_std;

  for (const auto& e : entries) {
    const bool is_train = e.meta.split == "train";
    const bool is_test = e.meta.split == "test";
    if (!is_train && !is_test) continue;

    if (direction == "e2v") {
      Tensor target = video_to_target_tensor(e.video);
      if (is_train) {
        train_targets_raw.push_back(std::move(target));
      } else {
        Tensor input = with_batch_axis(features_to_tensor(e.features, scaler));
        Tensor pred = model.forward(input);
        test_pred_raw[e.meta.subject].push_back(pred.reshaped(
            {pred.shape[1], pred.shape[2], pred.shape[3]}));
        test_truth_raw[e.meta.subject].push_back(std::move(target));
      }
    } else {
      Tensor target_std = features_to_tensor(e.features, scaler);
      if (is_train) {
        train_targets_std.push_back(target_std);
        Tensor raw({static_cast<int>(e.features.rows), e.features.dim});
        for (std::int64_t i = 0; i < raw.size(); ++i)
          raw.data[static_cast<std::size_t>(i)] = static_cast<float>(e.features.data[static_cast<std::size_t>(i)]);
        train_targets_raw.push_back(std::move(raw));
      } else {
        Tensor input = with_batch_axis(video_to_input_tensor(e.video));
        Tensor pred_std = model.forward(input).reshaped(
            {static_cast<int>(e.features.rows), e.features.dim});
        // unstandardize both sides for the raw-projection-space report
        const FeatureSequence pred_feat = tensor_to_features(pred_std, scaler, e.features.rate);
        Tensor pred_raw({static_cast<int>(e.features.rows), e.features.dim});
        Tensor truth_raw({static_cast<int>(e.features.rows), e.features.dim});
        for (std::int64_t i = 0; i < pred_raw.size(); ++i) {
          pred_raw.data[static_cast<std::size_t>(i)] = static_cast<float>(pred_feat.data[static_cast<std::size_t>(i)]);
          truth_raw.data[static_cast<std::size_t>(i)] = static_cast<float>(e.features.data[static_cast<std::size_t>(i)]);
        }
        all_pred_std.push_back(pred_std);
        all_truth_std.push_back(target_std);
        test_pred_raw[e.meta.subject].push_back(std::move(pred_raw));
        test_truth_raw[e.meta.subject].push_back(std::move(truth_raw));
      }
    }
  }

  std::vector<Tensor> pooled_pred, pooled_truth;
  for (auto& [subject, preds] : test_pred_raw) {
    SubjectResult row;
    row.subject = subject;
    row.direction = direction;
    row.model_rmse = rmse_pooled(preds, test_truth_raw[subject]);
    row.baseline_rmse = mean_baseline(train_targets_raw, test_truth_raw[subject]);
    report.rows.push_back(row);
    for (auto& p : preds) pooled_pred.push_back(p);
    for (auto& t : test_truth_raw[subject]) pooled_truth.push_back(t);
  }
  if (pooled_pred.empty()) throw std::invalid_argument("evaluate_direction: no test entries");
  report.pooled_model_rmse = rmse_pooled(pooled_pred, pooled_truth);
  report.pooled_baseline_rmse = mean_baseline(train_targets_raw, pooled_truth);

  if (direction == "v2e") {
    report.std_space_model_rmse = rmse_pooled(all_pred_std, all_truth_std);
    report.std_space_baseline_rmse = mean_baseline(train_targets_std, all_truth_std);
  }
  return report;
}

}  // namespace neuroframe
