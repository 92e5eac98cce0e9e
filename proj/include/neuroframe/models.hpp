#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/nn.hpp"
#include "neuroframe/tensor.hpp"

namespace neuroframe {

// An assembled architecture plus the input contract it was built for.
struct Model {
  std::string arch;  // "e2v" | "v2e"
  std::uint64_t seed = 0;
  Sequential<float> net;
  std::vector<int> input_trailing;  // expected extents after [B,T]

  void check_input_shape(const std::vector<int>& shape) const {
    if (shape.size() != 2 + input_trailing.size())
      throw std::invalid_argument("model " + arch + ": input rank mismatch, got " +
                                  Tensor::shape_str(shape));
    for (std::size_t i = 0; i < input_trailing.size(); ++i)
      if (shape[i + 2] != input_trailing[i])
        throw std::invalid_argument("model " + arch + ": input shape mismatch, got " +
                                    Tensor::shape_str(shape));
  }

  Tensor forward(const Tensor& x) {
    check_input_shape(x.shape);
    return net.forward(x);
  }

  std::int64_t parameter_count() {
    std::int64_t n = 0;
    for (auto* p : net.parameters()) n += p->value.size();
    return n;
  }
};

// EEG features -> video frames:
// TCN(128) -> dense_td(10000) -> reshape [B,T,100,100] -> conv2d_transpose
// (1,1) ReLU x2 -> upsample (1,1) -> dense over the channel axis -> frames.
inline Model build_eeg2video(std::uint64_t seed) {
  Model m;
  m.arch = "e2v";
  m.seed = seed;
  m.input_trailing = {30};
  Rng rng(seed);
  m.net.add(std::make_unique<Tcn<float>>(30, 128, 3, std::vector<int>{1, 2}, "tcn", rng));
  m.net.add(std::make_unique<DenseTD<float>>(128, 10000, Activation::Linear, "dense_wide", rng));
  m.net.add(std::make_unique<ReshapeTD<float>>(std::vector<int>{100, 100}));
  m.net.add(std::make_unique<ConvTranspose2d<float>>(100, 100, 1, 1, Activation::Relu, "convt1", rng));
  m.net.add(std::make_unique<ConvTranspose2d<float>>(100, 100, 1, 1, Activation::Relu, "convt2", rng));
  m.net.add(std::make_unique<Upsample2d<float>>(1, 1));
  m.net.add(std::make_unique<DenseTD<float>>(100, 100, Activation::Linear, "dense_out", rng));
  return m;
}

// Video frames -> EEG features:
// conv2d(100,(1,3)) ReLU x2 -> maxpool (1,2) -> flatten per (B,T) -> dense_td(30).
inline Model build_video2eeg(std::uint64_t seed) {
  Model m;
  m.arch = "v2e";
  m.seed = seed;
  m.input_trailing = {100, 100};
  Rng rng(seed);
  m.net.add(std::make_unique<Conv2d<float>>(100, 100, 1, 3, Activation::Relu, "conv1", rng));
  m.net.add(std::make_unique<Conv2d<float>>(100, 100, 1, 3, Activation::Relu, "conv2", rng));
  m.net.add(std::make_unique<MaxPool2d<float>>(1, 2));
  m.net.add(std::make_unique<FlattenTD<float>>());
  m.net.add(std::make_unique<DenseTD<float>>(50 * 100, 30, Activation::Linear, "dense_out", rng));
  return m;
}

inline Model build_model(const std::string& arch, std::uint64_t seed) {
  if (arch == "e2v") return build_eeg2video(seed);
  if (arch == "v2e") return build_video2eeg(seed);
  throw std::invalid_argument("unknown architecture '" + arch + "'");
}

// One aligned sequence: input [T, ...] and target [T, ...] share tick counts.
struct TrainPair {
  Tensor input;
  Tensor target;
};

struct TrainConfig {
  int epochs = 50;          // long-run presets: 500 (e2v), 1000 (v2e)
  int batch_size = 100;
  double val_split = 0.05;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int chunk_ticks = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(val_split > 0.0 && val_split < 1.0))
      throw std::invalid_argument("train config: val_split must be in (0,1)");
    if (chunk_ticks < 1) throw std::invalid_argument("train config: chunk_ticks must be >= 1");
  }
};

struct EpochStats {
  double train_mse = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  std::string checkpoint_ref;
  int train_sequences = 0;
  int val_sequences = 0;
  int train_chunks = 0;
  int val_chunks = 0;
};

namespace detail {

// Pair-level split: a seeded shuffle, then the last round(val_split*n)
// sequences become the validation set.
inline std::pair<std::vector<int>, std::vector<int>> split_train_val(std::size_t n,
                                                                     double val_split, Rng& rng) {
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  seeded_shuffle(order, rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_split * static_cast<double>(n)));
  std::vector<int> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<int> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return {std::move(train), std::move(val)};
}

struct Chunk {
  int pair = 0;
  int t0 = 0;
  int len = 0;
};

// Copies chunk rows of every selected chunk into a stacked [B, len, ...] batch.
inline Tensor stack_chunks(const std::vector<TrainPair>& pairs, const std::vector<Chunk>& chunks,
                           const std::vector<int>& which, bool target) {
  const Chunk& first = chunks[static_cast<std::size_t>(which.front())];
  const Tensor& proto = target ? pairs[static_cast<std::size_t>(first.pair)].target
                               : pairs[static_cast<std::size_t>(first.pair)].input;
  std::int64_t row_elems = 1;
  for (int i = 1; i < proto.rank(); ++i) row_elems *= proto.shape[static_cast<std::size_t>(i)];

  std::vector<int> shape{static_cast<int>(which.size()), first.len};
  for (int i = 1; i < proto.rank(); ++i) shape.push_back(proto.shape[static_cast<std::size_t>(i)]);
  Tensor out(shape);
  for (std::size_t s = 0; s < which.size(); ++s) {
    const Chunk& c = chunks[static_cast<std::size_t>(which[s])];
    const Tensor& src = target ? pairs[static_cast<std::size_t>(c.pair)].target
                               : pairs[static_cast<std::size_t>(c.pair)].input;
    const float* from = src.data.data() + static_cast<std::int64_t>(c.t0) * row_elems;
    float* to = out.data.data() + static_cast<std::int64_t>(s) * c.len * row_elems;
    std::copy(from, from + static_cast<std::int64_t>(c.len) * row_elems, to);
  }
  return out;
}

}  // namespace detail

using SampleHook = std::function<void(int epoch, Model& model)>;

// Seeded shuffling each epoch, mini-batches with the last partial batch kept,
// Adam updates, per-epoch train and validation MSE. Sequences are cut into
// fixed-length chunks (whole sequence when shorter). Deterministic per seed.
inline TrainingLog train(Model& model, const std::vector<TrainPair>& pairs, const TrainConfig& cfg,
                         const SampleHook& hook = {}) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& p : pairs) {
    if (p.input.shape.front() != p.target.shape.front())
      throw std::invalid_argument("train: input/target tick counts differ within a pair");
    std::vector<int> batched{1};
    batched.insert(batched.end(), p.input.shape.begin(), p.input.shape.end());
    model.check_input_shape(batched);
  }

  Rng rng(cfg.seed);
  auto [train_pairs, val_pairs] = detail::split_train_val(pairs.size(), cfg.val_split, rng);
  if (train_pairs.empty()) throw std::invalid_argument("train: validation split leaves no training data");

  auto make_chunks = [&](const std::vector<int>& pair_ids) {
    std::vector<detail::Chunk> chunks;
    for (int pid : pair_ids) {
      const int ticks = pairs[static_cast<std::size_t>(pid)].input.shape.front();
      for (int t0 = 0; t0 < ticks; t0 += cfg.chunk_ticks)
        chunks.push_back({pid, t0, std::min(cfg.chunk_ticks, ticks - t0)});
    }
    return chunks;
  };
  const auto train_chunks = make_chunks(train_pairs);
  const auto val_chunks = make_chunks(val_pairs);

  // Group chunk ids by length so every batch is rectangular.
  std::map<int, std::vector<int>> by_len;
  for (std::size_t i = 0; i < train_chunks.size(); ++i)
    by_len[train_chunks[i].len].push_back(static_cast<int>(i));

  const AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon};
  const auto params = model.net.parameters();

  // Per-chunk squared-error slots summed in canonical order keep the epoch
  // loss bit-stable under shuffling.
  std::vector<double> sse(train_chunks.size(), 0.0);
  std::vector<std::int64_t> cnt(train_chunks.size(), 0);

  auto evaluate = [&](const std::vector<detail::Chunk>& chunks) {
    if (chunks.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    std::int64_t count = 0;
    std::vector<int> batch;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      batch.push_back(static_cast<int>(i));
      const bool flush = batch.size() == static_cast<std::size_t>(cfg.batch_size) ||
                         i + 1 == chunks.size() ||
                         chunks[i + 1].len != chunks[static_cast<std::size_t>(batch.front())].len;
      if (flush) {
        const Tensor x = detail::stack_chunks(pairs, chunks, batch, false);
        const Tensor y = detail::stack_chunks(pairs, chunks, batch, true);
        const Tensor pred = model.net.forward(x);
        for (std::int64_t j = 0; j < pred.size(); ++j) {
          const double d = static_cast<double>(pred.data[static_cast<std::size_t>(j)]) -
                           static_cast<double>(y.data[static_cast<std::size_t>(j)]);
          acc += d * d;
        }
        count += pred.size();
        batch.clear();
      }
    }
    return acc / static_cast<double>(count);
  };

  TrainingLog log;
  log.train_sequences = static_cast<int>(train_pairs.size());
  log.val_sequences = static_cast<int>(val_pairs.size());
  log.train_chunks = static_cast<int>(train_chunks.size());
  log.val_chunks = static_cast<int>(val_chunks.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t_start = std::chrono::steady_clock::now();
    std::fill(sse.begin(), sse.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);

    for (auto& [len, ids] : by_len) {
      std::vector<int> shuffled = ids;
      seeded_shuffle(shuffled, rng);
      for (std::size_t pos = 0; pos < shuffled.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(shuffled.size(), pos + static_cast<std::size_t>(cfg.batch_size));
        const std::vector<int> batch(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                                     shuffled.begin() + static_cast<std::ptrdiff_t>(end));
        const Tensor x = detail::stack_chunks(pairs, train_chunks, batch, false);
        const Tensor y = detail::stack_chunks(pairs, train_chunks, batch, true);

        model.net.zero_grads();
        const Tensor pred = model.net.forward(x);
        auto [loss, grad] = mse_loss(pred, y);
        if (!std::isfinite(loss)) throw NumericError("train: loss became non-finite");

        // per-chunk squared error for the canonical-order epoch loss
        const std::int64_t chunk_elems = pred.size() / static_cast<std::int64_t>(batch.size());
        for (std::size_t s = 0; s < batch.size(); ++s) {
          double acc = 0.0;
          const float* pp = pred.data.data() + static_cast<std::int64_t>(s) * chunk_elems;
          const float* ty = y.data.data() + static_cast<std::int64_t>(s) * chunk_elems;
          for (std::int64_t j = 0; j < chunk_elems; ++j) {
            const double d = static_cast<double>(pp[j]) - static_cast<double>(ty[j]);
            acc += d * d;
          }
          sse[static_cast<std::size_t>(batch[s])] = acc;
          cnt[static_cast<std::size_t>(batch[s])] = chunk_elems;
        }

        model.net.backward(grad);
        adam_step(params, adam);
      }
    }

    EpochStats stats;
    double total_sse = 0.0;
    std::int64_t total_cnt = 0;
    for (std::size_t i = 0; i < sse.size(); ++i) {
      total_sse += sse[i];
      total_cnt += cnt[i];
    }
    stats.train_mse = total_sse / static_cast<double>(total_cnt);
    if (!std::isfinite(stats.train_mse)) throw NumericError("train: loss became non-finite");
    stats.val_mse = evaluate(val_chunks);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    log.epochs.push_back(stats);
    if (hook) hook(epoch, model);
  }
  return log;
}

inline Tensor predict(Model& model, const Tensor& input) { return model.forward(input); }

}  // namespace neuroframe
