#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/tensor.hpp"

namespace neuroframe {

// Trainable tensor with Adam moment buffers.
template <typename T>
struct ParameterT {
  std::string name;
  TensorT<T> value;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  std::int64_t step_count = 0;

  void init_moments() {
    adam_m.assign(value.data.size(), T(0));
    adam_v.assign(value.data.size(), T(0));
    step_count = 0;
  }
};

using Parameter = ParameterT<float>;

enum class Activation { Linear, Relu };

namespace detail {

// He-uniform for ReLU fan-in, Glorot-uniform for linear maps.
template <typename T>
void init_weights(TensorT<T>& w, std::int64_t fan_in, std::int64_t fan_out, Activation act,
                  Rng& rng) {
  const double limit = act == Activation::Relu
                           ? std::sqrt(6.0 / static_cast<double>(fan_in))
                           : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data) v = static_cast<T>(uniform(rng, -limit, limit));
}

template <typename T>
void add_bias_rows(T* out, const T* bias, std::int64_t rows, std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    T* row = out + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) row[c] += bias[c];
  }
}

template <typename T>
void accumulate_column_sums(const T* g, std::int64_t rows, std::int64_t cols, T* out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = g + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

}  // namespace detail

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual TensorT<T> forward(const TensorT<T>& x) = 0;
  virtual TensorT<T> backward(const TensorT<T>& grad_out) = 0;
  virtual void collect_parameters(std::vector<ParameterT<T>*>& out) { (void)out; }
  virtual const char* kind() const = 0;
};

// Same affine map applied at every leading position; the last axis is the
// feature axis. Covers both time-distributed dense ([B,T,F]) and the
// channel-axis dense used on [B,T,H,C] frames.
template <typename T>
class DenseTD : public Layer<T> {
 public:
  DenseTD(int in_features, int units, Activation act, std::string name_prefix, Rng& rng)
      : in_(in_features), units_(units), act_(act) {
    if (in_features <= 0 || units <= 0)
      throw std::invalid_argument("dense_td: feature counts must be positive");
    weight_.name = name_prefix + ".weight";
    weight_.value = TensorT<T>({in_features, units});
    detail::init_weights(weight_.value, in_features, units, act, rng);
    bias_.name = name_prefix + ".bias";
    bias_.value = TensorT<T>({units});
    weight_.init_moments();
    bias_.init_moments();
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.shape.back() != in_)
      throw std::invalid_argument("dense_td: input feature axis is " +
                                  std::to_string(x.shape.back()) + ", expected " +
                                  std::to_string(in_));
    cached_input_ = x;
    const std::int64_t rows = x.size() / in_;
    std::vector<int> out_shape = x.shape;
    out_shape.back() = units_;
    TensorT<T> y(out_shape);
    detail::matmul(x.data.data(), weight_.value.data.data(), y.data.data(), rows, in_, units_,
                   false);
    detail::add_bias_rows(y.data.data(), bias_.value.data.data(), rows, units_);
    if (act_ == Activation::Relu)
      for (auto& v : y.data) v = v > T(0) ? v : T(0);
    cached_output_ = y;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    if (!grad_out.same_shape(cached_output_))
      throw std::invalid_argument("dense_td: gradient shape mismatch");
    const std::int64_t rows = grad_out.size() / units_;
    TensorT<T> g = grad_out;
    if (act_ == Activation::Relu)
      for (std::int64_t i = 0; i < g.size(); ++i)
        if (!(cached_output_.data[static_cast<std::size_t>(i)] > T(0))) g.data[static_cast<std::size_t>(i)] = T(0);

    weight_.value.ensure_grad();
    bias_.value.ensure_grad();
    detail::matmul_at_b(cached_input_.data.data(), g.data.data(), weight_.value.grad.data(), rows,
                        in_, units_, true);
    detail::accumulate_column_sums(g.data.data(), rows, units_, bias_.value.grad.data());

    TensorT<T> dx(cached_input_.shape);
    detail::matmul_a_bt(g.data.data(), weight_.value.data.data(), dx.data.data(), rows, units_,
                        in_, false);
    return dx;
  }

  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const char* kind() const override { return "dense_td"; }

  ParameterT<T>& weight() { return weight_; }
  ParameterT<T>& bias() { return bias_; }
  int units() const { return units_; }

 private:
  int in_, units_;
  Activation act_;
  ParameterT<T> weight_, bias_;
  TensorT<T> cached_input_, cached_output_;
};

// With kernel (1,1) and stride 1 a transposed convolution over channels-last
// frames is exactly a per-position affine map across the channel axis.
// Only this configuration is supported.
template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int in_channels, int filters, int kernel_h, int kernel_w, Activation act,
                  std::string name_prefix, Rng& rng)
      : dense_(check_config(in_channels, kernel_h, kernel_w), filters, act,
               std::move(name_prefix), rng) {}

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 4) throw std::invalid_argument("conv2d_transpose: expected [B,T,H,C]");
    return dense_.forward(x);
  }
  TensorT<T> backward(const TensorT<T>& grad_out) override { return dense_.backward(grad_out); }
  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    dense_.collect_parameters(out);
  }
  const char* kind() const override { return "conv2d_transpose"; }

  ParameterT<T>& weight() { return dense_.weight(); }
  ParameterT<T>& bias() { return dense_.bias(); }

 private:
  static int check_config(int in_channels, int kernel_h, int kernel_w) {
    if (kernel_h != 1 || kernel_w != 1)
      throw std::invalid_argument("conv2d_transpose: only kernel (1,1), stride 1 is supported");
    return in_channels;
  }
  DenseTD<T> dense_;
};

// 2D convolution over the (T,H) axes of a channels-last [B,T,H,C] tensor,
// "same" zero padding, stride 1, implemented via im2col patches.
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_channels, int filters, int kernel_h, int kernel_w, Activation act,
         std::string name_prefix, Rng& rng)
      : in_(in_channels), filters_(filters), kh_(kernel_h), kw_(kernel_w), act_(act) {
    if (in_channels <= 0 || filters <= 0) throw std::invalid_argument("conv2d: bad channel counts");
    if (kernel_h < 1 || kernel_w < 1 || kernel_h % 2 == 0 || kernel_w % 2 == 0)
      throw std::invalid_argument("conv2d: kernel extents must be odd and positive");
    patch_cols_ = kh_ * kw_ * in_;
    weight_.name = name_prefix + ".weight";
    weight_.value = TensorT<T>({patch_cols_, filters});
    detail::init_weights(weight_.value, patch_cols_, static_cast<std::int64_t>(kh_) * kw_ * filters,
                         act, rng);
    bias_.name = name_prefix + ".bias";
    bias_.value = TensorT<T>({filters});
    weight_.init_moments();
    bias_.init_moments();
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 4) throw std::invalid_argument("conv2d: expected [B,T,H,C]");
    if (x.shape[3] != in_) throw std::invalid_argument("conv2d: channel mismatch");
    if (x.shape[1] < (kh_ + 1) / 2 || x.shape[2] < (kw_ + 1) / 2)
      throw std::invalid_argument("conv2d: kernel larger than padded input");
    cached_input_ = x;
    const int B = x.shape[0], Tn = x.shape[1], H = x.shape[2];
    const std::int64_t positions = static_cast<std::int64_t>(Tn) * H;

    TensorT<T> y({B, Tn, H, filters_});
    std::vector<T> patches(static_cast<std::size_t>(positions) * patch_cols_);
    for (int b = 0; b < B; ++b) {
      fill_patches(x, b, patches);
      T* yb = y.data.data() + static_cast<std::int64_t>(b) * positions * filters_;
      detail::matmul(patches.data(), weight_.value.data.data(), yb, positions, patch_cols_,
                     filters_, false);
      detail::add_bias_rows(yb, bias_.value.data.data(), positions, filters_);
    }
    if (act_ == Activation::Relu)
      for (auto& v : y.data) v = v > T(0) ? v : T(0);
    cached_output_ = y;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    if (!grad_out.same_shape(cached_output_))
      throw std::invalid_argument("conv2d: gradient shape mismatch");
    const int B = cached_input_.shape[0], Tn = cached_input_.shape[1], H = cached_input_.shape[2];
    const std::int64_t positions = static_cast<std::int64_t>(Tn) * H;

    TensorT<T> g = grad_out;
    if (act_ == Activation::Relu)
      for (std::int64_t i = 0; i < g.size(); ++i)
        if (!(cached_output_.data[static_cast<std::size_t>(i)] > T(0))) g.data[static_cast<std::size_t>(i)] = T(0);

    weight_.value.ensure_grad();
    bias_.value.ensure_grad();
    TensorT<T> dx(cached_input_.shape);
    std::vector<T> patches(static_cast<std::size_t>(positions) * patch_cols_);
    std::vector<T> dpatches(patches.size());
    for (int b = 0; b < B; ++b) {
      const T* gb = g.data.data() + static_cast<std::int64_t>(b) * positions * filters_;
      fill_patches(cached_input_, b, patches);
      detail::matmul_at_b(patches.data(), gb, weight_.value.grad.data(), positions, patch_cols_,
                          filters_, true);
      detail::accumulate_column_sums(gb, positions, filters_, bias_.value.grad.data());
      detail::matmul_a_bt(gb, weight_.value.data.data(), dpatches.data(), positions, filters_,
                          patch_cols_, false);
      scatter_patches(dpatches, b, dx);
    }
    return dx;
  }

  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const char* kind() const override { return "conv2d"; }

  ParameterT<T>& weight() { return weight_; }
  ParameterT<T>& bias() { return bias_; }

 private:
  void fill_patches(const TensorT<T>& x, int b, std::vector<T>& patches) const {
    const int Tn = x.shape[1], H = x.shape[2];
    std::fill(patches.begin(), patches.end(), T(0));
    const int pad_t = (kh_ - 1) / 2, pad_h = (kw_ - 1) / 2;
    const T* xb = x.data.data() + static_cast<std::int64_t>(b) * Tn * H * in_;
    for (int i = 0; i < kh_; ++i) {
      const int dt = i - pad_t;
      for (int j = 0; j < kw_; ++j) {
        const int dh = j - pad_h;
        const int col0 = (i * kw_ + j) * in_;
        const int t0 = std::max(0, -dt), t1 = std::min(Tn, Tn - dt);
        const int h0 = std::max(0, -dh), h1 = std::min(H, H - dh);
        for (int t = t0; t < t1; ++t) {
          const T* src = xb + (static_cast<std::int64_t>(t + dt) * H + (h0 + dh)) * in_;
          T* dst = patches.data() + (static_cast<std::int64_t>(t) * H + h0) * patch_cols_ + col0;
          for (int h = h0; h < h1; ++h) {
            std::copy(src, src + in_, dst);
            src += in_;
            dst += patch_cols_;
          }
        }
      }
    }
  }

  void scatter_patches(const std::vector<T>& dpatches, int b, TensorT<T>& dx) const {
    const int Tn = dx.shape[1], H = dx.shape[2];
    const int pad_t = (kh_ - 1) / 2, pad_h = (kw_ - 1) / 2;
    T* xb = dx.data.data() + static_cast<std::int64_t>(b) * Tn * H * in_;
    for (int i = 0; i < kh_; ++i) {
      const int dt = i - pad_t;
      for (int j = 0; j < kw_; ++j) {
        const int dh = j - pad_h;
        const int col0 = (i * kw_ + j) * in_;
        const int t0 = std::max(0, -dt), t1 = std::min(Tn, Tn - dt);
        const int h0 = std::max(0, -dh), h1 = std::min(H, H - dh);
        for (int t = t0; t < t1; ++t) {
          T* dst = xb + (static_cast<std::int64_t>(t + dt) * H + (h0 + dh)) * in_;
          const T* src = dpatches.data() + (static_cast<std::int64_t>(t) * H + h0) * patch_cols_ + col0;
          for (int h = h0; h < h1; ++h) {
            for (int c = 0; c < in_; ++c) dst[c] += src[c];
            src += patch_cols_;
            dst += in_;
          }
        }
      }
    }
  }

  int in_, filters_, kh_, kw_;
  int patch_cols_;
  Activation act_;
  ParameterT<T> weight_, bias_;
  TensorT<T> cached_input_, cached_output_;
};

// Dilated causal 1D convolution over [B,T,C] with left zero padding of
// (kernel-1)*dilation; output time length equals input time length.
template <typename T>
class CausalConv1d : public Layer<T> {
 public:
  CausalConv1d(int in_channels, int out_channels, int kernel, int dilation, Activation init_act,
               std::string name_prefix, Rng& rng)
      : in_(in_channels), out_(out_channels), kernel_(kernel), dilation_(dilation) {
    if (in_channels <= 0 || out_channels <= 0)
      throw std::invalid_argument("causal_conv1d: bad channel counts");
    if (kernel < 1) throw std::invalid_argument("causal_conv1d: kernel must be >= 1");
    if (dilation < 1) throw std::invalid_argument("causal_conv1d: dilation must be positive");
    weight_.name = name_prefix + ".weight";
    weight_.value = TensorT<T>({kernel, in_channels, out_channels});
    detail::init_weights(weight_.value, static_cast<std::int64_t>(kernel) * in_channels,
                         static_cast<std::int64_t>(kernel) * out_channels, init_act, rng);
    bias_.name = name_prefix + ".bias";
    bias_.value = TensorT<T>({out_channels});
    weight_.init_moments();
    bias_.init_moments();
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 3) throw std::invalid_argument("causal_conv1d: expected [B,T,C]");
    if (x.shape[2] != in_) throw std::invalid_argument("causal_conv1d: channel mismatch");
    cached_input_ = x;
    const int B = x.shape[0], Tn = x.shape[1];
    TensorT<T> y({B, Tn, out_});
    detail::add_bias_rows(y.data.data(), bias_.value.data.data(),
                          static_cast<std::int64_t>(B) * Tn, out_);
    for (int j = 0; j < kernel_; ++j) {
      const int offset = (kernel_ - 1 - j) * dilation_;
      if (offset >= Tn) continue;
      const T* wj = weight_.value.data.data() + static_cast<std::int64_t>(j) * in_ * out_;
      for (int b = 0; b < B; ++b) {
        const T* xb = x.data.data() + (static_cast<std::int64_t>(b) * Tn) * in_;
        T* yb = y.data.data() + (static_cast<std::int64_t>(b) * Tn + offset) * out_;
        detail::matmul(xb, wj, yb, Tn - offset, in_, out_, true);
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    const int B = cached_input_.shape[0], Tn = cached_input_.shape[1];
    if (grad_out.rank() != 3 || grad_out.shape[0] != B || grad_out.shape[1] != Tn ||
        grad_out.shape[2] != out_)
      throw std::invalid_argument("causal_conv1d: gradient shape mismatch");
    weight_.value.ensure_grad();
    bias_.value.ensure_grad();
    detail::accumulate_column_sums(grad_out.data.data(), static_cast<std::int64_t>(B) * Tn, out_,
                                   bias_.value.grad.data());
    TensorT<T> dx(cached_input_.shape);
    for (int j = 0; j < kernel_; ++j) {
      const int offset = (kernel_ - 1 - j) * dilation_;
      if (offset >= Tn) continue;
      const T* wj = weight_.value.data.data() + static_cast<std::int64_t>(j) * in_ * out_;
      T* dwj = weight_.value.grad.data() + static_cast<std::int64_t>(j) * in_ * out_;
      for (int b = 0; b < B; ++b) {
        const T* xb = cached_input_.data.data() + (static_cast<std::int64_t>(b) * Tn) * in_;
        const T* gb = grad_out.data.data() + (static_cast<std::int64_t>(b) * Tn + offset) * out_;
        T* dxb = dx.data.data() + (static_cast<std::int64_t>(b) * Tn) * in_;
        detail::matmul_at_b(xb, gb, dwj, Tn - offset, in_, out_, true);
        detail::matmul_a_bt(gb, wj, dxb, Tn - offset, out_, in_, true);
      }
    }
    return dx;
  }

  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  const char* kind() const override { return "causal_conv1d"; }

  ParameterT<T>& weight() { return weight_; }
  ParameterT<T>& bias() { return bias_; }

 private:
  int in_, out_, kernel_, dilation_;
  ParameterT<T> weight_, bias_;
  TensorT<T> cached_input_;
};

template <typename T>
class Relu : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x) override {
    TensorT<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    cached_output_ = y;
    return y;
  }
  TensorT<T> backward(const TensorT<T>& grad_out) override {
    if (!grad_out.same_shape(cached_output_))
      throw std::invalid_argument("relu: gradient shape mismatch");
    TensorT<T> dx = grad_out;
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (!(cached_output_.data[static_cast<std::size_t>(i)] > T(0))) dx.data[static_cast<std::size_t>(i)] = T(0);
    return dx;
  }
  const char* kind() const override { return "relu"; }

 private:
  TensorT<T> cached_output_;
};

// Residual block of two dilated causal convolutions with ReLU after each
// convolution, plus a 1x1 projection on the skip path when channel counts
// differ. No activation after the residual add.
template <typename T>
class TcnBlock : public Layer<T> {
 public:
  TcnBlock(int in_channels, int out_channels, int kernel, int dilation, std::string name_prefix,
           Rng& rng)
      : conv1_(in_channels, out_channels, kernel, dilation, Activation::Relu, name_prefix + ".conv1", rng),
        conv2_(out_channels, out_channels, kernel, dilation, Activation::Relu, name_prefix + ".conv2", rng) {
    if (in_channels != out_channels)
      proj_ = std::make_unique<CausalConv1d<T>>(in_channels, out_channels, 1, 1,
                                                Activation::Linear, name_prefix + ".proj", rng);
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    TensorT<T> h = relu1_.forward(conv1_.forward(x));
    h = relu2_.forward(conv2_.forward(h));
    const TensorT<T> skip = proj_ ? proj_->forward(x) : x;
    for (std::int64_t i = 0; i < h.size(); ++i) h.data[static_cast<std::size_t>(i)] += skip.data[static_cast<std::size_t>(i)];
    return h;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    TensorT<T> dbranch = conv1_.backward(relu1_.backward(conv2_.backward(relu2_.backward(grad_out))));
    const TensorT<T> dskip = proj_ ? proj_->backward(grad_out) : grad_out;
    for (std::int64_t i = 0; i < dbranch.size(); ++i)
      dbranch.data[static_cast<std::size_t>(i)] += dskip.data[static_cast<std::size_t>(i)];
    return dbranch;
  }

  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    conv1_.collect_parameters(out);
    conv2_.collect_parameters(out);
    if (proj_) proj_->collect_parameters(out);
  }
  const char* kind() const override { return "tcn_block"; }

  CausalConv1d<T>& conv1() { return conv1_; }
  CausalConv1d<T>& conv2() { return conv2_; }
  CausalConv1d<T>* proj() { return proj_.get(); }

 private:
  CausalConv1d<T> conv1_, conv2_;
  Relu<T> relu1_, relu2_;
  std::unique_ptr<CausalConv1d<T>> proj_;
};

// Stack of residual TCN blocks, one per dilation.
template <typename T>
class Tcn : public Layer<T> {
 public:
  Tcn(int in_channels, int filters, int kernel, const std::vector<int>& dilations,
      std::string name_prefix, Rng& rng) {
    if (dilations.empty()) throw std::invalid_argument("tcn: need at least one dilation");
    int ch = in_channels;
    for (std::size_t i = 0; i < dilations.size(); ++i) {
      blocks_.push_back(std::make_unique<TcnBlock<T>>(
          ch, filters, kernel, dilations[i], name_prefix + ".block" + std::to_string(i), rng));
      ch = filters;
    }
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    TensorT<T> h = x;
    for (auto& block : blocks_) h = block->forward(h);
    return h;
  }
  TensorT<T> backward(const TensorT<T>& grad_out) override {
    TensorT<T> g = grad_out;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect_parameters(std::vector<ParameterT<T>*>& out) override {
    for (auto& block : blocks_) block->collect_parameters(out);
  }
  const char* kind() const override { return "tcn"; }

 private:
  std::vector<std::unique_ptr<TcnBlock<T>>> blocks_;
};

// Nearest-neighbour repetition along the (T,H) axes; size (1,1) is the
// identity in both directions.
template <typename T>
class Upsample2d : public Layer<T> {
 public:
  Upsample2d(int size_t_axis, int size_h_axis) : st_(size_t_axis), sh_(size_h_axis) {
    if (st_ < 1 || sh_ < 1) throw std::invalid_argument("upsample2d: sizes must be >= 1");
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 4) throw std::invalid_argument("upsample2d: expected [B,T,H,C]");
    in_shape_ = x.shape;
    if (st_ == 1 && sh_ == 1) return x;
    const int B = x.shape[0], Tn = x.shape[1], H = x.shape[2], C = x.shape[3];
    TensorT<T> y({B, Tn * st_, H * sh_, C});
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < Tn * st_; ++t)
        for (int h = 0; h < H * sh_; ++h) {
          const T* src = x.data.data() +
                         ((static_cast<std::int64_t>(b) * Tn + t / st_) * H + h / sh_) * C;
          T* dst = y.data.data() +
                   ((static_cast<std::int64_t>(b) * Tn * st_ + t) * H * sh_ + h) * C;
          std::copy(src, src + C, dst);
        }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    if (st_ == 1 && sh_ == 1) {
      if (grad_out.shape != in_shape_) throw std::invalid_argument("upsample2d: gradient shape mismatch");
      return grad_out;
    }
    const int B = in_shape_[0], Tn = in_shape_[1], H = in_shape_[2], C = in_shape_[3];
    if (grad_out.shape != std::vector<int>{B, Tn * st_, H * sh_, C})
      throw std::invalid_argument("upsample2d: gradient shape mismatch");
    TensorT<T> dx(in_shape_);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < Tn * st_; ++t)
        for (int h = 0; h < H * sh_; ++h) {
          const T* src = grad_out.data.data() +
                         ((static_cast<std::int64_t>(b) * Tn * st_ + t) * H * sh_ + h) * C;
          T* dst = dx.data.data() +
                   ((static_cast<std::int64_t>(b) * Tn + t / st_) * H + h / sh_) * C;
          for (int c = 0; c < C; ++c) dst[c] += src[c];
        }
    return dx;
  }
  const char* kind() const override { return "upsample2d"; }

 private:
  int st_, sh_;
  std::vector<int> in_shape_;
};

// Non-overlapping max pooling over the (T,H) axes; gradient flows to the
// first maximum of each window.
template <typename T>
class MaxPool2d : public Layer<T> {
 public:
  MaxPool2d(int pool_t, int pool_h) : pt_(pool_t), ph_(pool_h) {
    if (pt_ < 1 || ph_ < 1) throw std::invalid_argument("maxpool2d: pool sizes must be >= 1");
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 4) throw std::invalid_argument("maxpool2d: expected [B,T,H,C]");
    const int B = x.shape[0], Tn = x.shape[1], H = x.shape[2], C = x.shape[3];
    if (Tn < pt_ || H < ph_)
      throw std::invalid_argument("maxpool2d: input smaller than pool window");
    in_shape_ = x.shape;
    const int To = Tn / pt_, Ho = H / ph_;
    TensorT<T> y({B, To, Ho, C});
    argmax_.assign(y.data.size(), 0);
    for (int b = 0; b < B; ++b)
      for (int to = 0; to < To; ++to)
        for (int ho = 0; ho < Ho; ++ho)
          for (int c = 0; c < C; ++c) {
            T best{};
            std::int64_t best_idx = -1;
            for (int dt = 0; dt < pt_; ++dt)
              for (int dh = 0; dh < ph_; ++dh) {
                const std::int64_t idx =
                    ((static_cast<std::int64_t>(b) * Tn + to * pt_ + dt) * H + ho * ph_ + dh) * C + c;
                const T v = x.data[static_cast<std::size_t>(idx)];
                if (best_idx < 0 || v > best) {
                  best = v;
                  best_idx = idx;
                }
              }
            const std::int64_t out_idx =
                ((static_cast<std::int64_t>(b) * To + to) * Ho + ho) * C + c;
            y.data[static_cast<std::size_t>(out_idx)] = best;
            argmax_[static_cast<std::size_t>(out_idx)] = best_idx;
          }
    out_shape_ = y.shape;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override {
    if (grad_out.shape != out_shape_)
      throw std::invalid_argument("maxpool2d: gradient shape mismatch");
    TensorT<T> dx(in_shape_);
    for (std::size_t i = 0; i < grad_out.data.size(); ++i)
      dx.data[static_cast<std::size_t>(argmax_[i])] += grad_out.data[i];
    return dx;
  }
  const char* kind() const override { return "maxpool2d"; }

 private:
  int pt_, ph_;
  std::vector<int> in_shape_, out_shape_;
  std::vector<std::int64_t> argmax_;
};

// Reshapes the trailing axes while keeping [B,T] fixed.
template <typename T>
class ReshapeTD : public Layer<T> {
 public:
  explicit ReshapeTD(std::vector<int> trailing) : trailing_(std::move(trailing)) {
    if (trailing_.empty() || trailing_.size() > 2)
      throw std::invalid_argument("reshape: trailing rank must be 1 or 2");
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() < 3) throw std::invalid_argument("reshape: expected at least [B,T,F]");
    in_shape_ = x.shape;
    std::int64_t trailing_in = 1;
    for (int i = 2; i < x.rank(); ++i) trailing_in *= x.shape[static_cast<std::size_t>(i)];
    std::int64_t trailing_out = 1;
    for (int e : trailing_) trailing_out *= e;
    if (trailing_in != trailing_out)
      throw std::invalid_argument("reshape: trailing element count mismatch");
    std::vector<int> shape{x.shape[0], x.shape[1]};
    shape.insert(shape.end(), trailing_.begin(), trailing_.end());
    return x.reshaped(shape);
  }

  TensorT<T> backward(const TensorT<T>& grad_out) override { return grad_out.reshaped(in_shape_); }
  const char* kind() const override { return "reshape"; }

 private:
  std::vector<int> trailing_;
  std::vector<int> in_shape_;
};

// [B,T,H,C] -> [B,T,H*C]
template <typename T>
class FlattenTD : public Layer<T> {
 public:
  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.rank() != 4) throw std::invalid_argument("flatten_td: expected [B,T,H,C]");
    in_shape_ = x.shape;
    return x.reshaped({x.shape[0], x.shape[1], x.shape[2] * x.shape[3]});
  }
  TensorT<T> backward(const TensorT<T>& grad_out) override { return grad_out.reshaped(in_shape_); }
  const char* kind() const override { return "flatten_td"; }

 private:
  std::vector<int> in_shape_;
};

template <typename T>
class Sequential {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  TensorT<T> forward(const TensorT<T>& x) {
    TensorT<T> h = x;
    for (auto& layer : layers_) h = layer->forward(h);
    return h;
  }

  TensorT<T> backward(const TensorT<T>& grad_out) {
    TensorT<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<ParameterT<T>*> parameters() {
    std::vector<ParameterT<T>*> out;
    for (auto& layer : layers_) layer->collect_parameters(out);
    return out;
  }

  void zero_grads() {
    for (auto* p : parameters()) {
      p->value.ensure_grad();
      p->value.zero_grad();
    }
  }

  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>* layer(std::size_t i) { return layers_.at(i).get(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Mean over all elements of the squared difference; the gradient w.r.t. the
// prediction is 2(pred-truth)/N.
template <typename T>
std::pair<double, TensorT<T>> mse_loss(const TensorT<T>& pred, const TensorT<T>& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("mse_loss: shape mismatch");
  const std::int64_t n = pred.size();
  double acc = 0.0;
  TensorT<T> grad(pred.shape);
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data[static_cast<std::size_t>(i)]) -
                     static_cast<double>(truth.data[static_cast<std::size_t>(i)]);
    acc += d * d;
    grad.data[static_cast<std::size_t>(i)] = static_cast<T>(2.0 * d / static_cast<double>(n));
  }
  return {acc / static_cast<double>(n), std::move(grad)};
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Standard bias-corrected Adam, applied in place. Epsilon sits outside the
// square root, so the very first step has magnitude lr*|g|/(|g|+eps).
template <typename T>
void adam_step(const std::vector<ParameterT<T>*>& params, const AdamConfig& cfg) {
  for (auto* p : params) {
    if (p->value.grad.size() != p->value.data.size())
      throw std::invalid_argument("adam_step: parameter " + p->name + " has no gradient");
    if (p->adam_m.size() != p->value.data.size()) p->init_moments();
    ++p->step_count;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step_count));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step_count));
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double g = static_cast<double>(p->value.grad[i]);
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in " + p->name);
      const double m = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * g * g;
      p->adam_m[i] = static_cast<T>(m);
      p->adam_v[i] = static_cast<T>(v);
      const double mhat = m / c1;
      const double vhat = v / c2;
      p->value.data[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
}

// Central finite differences against the analytic backward pass, in float64.
// Returns the max relative error over input and parameter gradients.
inline double grad_check(Layer<double>& layer, const TensorT<double>& input, std::uint64_t seed,
                         double h = 1e-4) {
  TensorT<double> x = input;
  TensorT<double> y = layer.forward(x);

  Rng rng(seed ^ 0x5eedface);
  TensorT<double> upstream(y.shape);
  for (auto& v : upstream.data) {
    v = uniform(rng, 0.5, 1.5);
    if (uniform01(rng) < 0.5) v = -v;
  }

  std::vector<ParameterT<double>*> params;
  layer.collect_parameters(params);
  for (auto* p : params) {
    p->value.ensure_grad();
    p->value.zero_grad();
  }
  const TensorT<double> dx = layer.backward(upstream);
  std::vector<std::vector<double>> dparams;
  for (auto* p : params) dparams.push_back(p->value.grad);

  auto objective = [&](const TensorT<double>& probe) {
    const TensorT<double> out = layer.forward(probe);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * upstream.data[i];
    return acc;
  };

  double max_rel = 0.0;
  auto compare = [&](double analytic, double plus, double minus) {
    const double numeric = (plus - minus) / (2.0 * h);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  };

  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double plus = objective(x);
    x.data[i] = saved - h;
    const double minus = objective(x);
    x.data[i] = saved;
    compare(dx.data[i], plus, minus);
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi]->value.data;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double plus = objective(x);
      value[i] = saved - h;
      const double minus = objective(x);
      value[i] = saved;
      compare(dparams[pi][i], plus, minus);
    }
  }
  return max_rel;
}

}  // namespace neuroframe
