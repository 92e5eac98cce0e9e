#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/threading.hpp"

namespace neuroframe {

// Dense row-major tensor of rank 1..4. Axis convention across the toolkit is
// [batch, time, rows, cols-or-channels]. The grad buffer is present only on
// tensors that accumulate gradients (parameters, loss adjoints).
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), T(0));
  }
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != count(shape))
      throw std::invalid_argument("tensor: data length does not match shape");
  }

  static std::int64_t count(const std::vector<int>& s) {
    if (s.empty() || s.size() > 4) throw std::invalid_argument("tensor: rank must be 1..4");
    std::int64_t n = 1;
    for (int e : s) {
      if (e <= 0) throw std::invalid_argument("tensor: extents must be positive");
      n *= e;
    }
    return n;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int extent(int axis) const { return shape.at(static_cast<std::size_t>(axis)); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  TensorT reshaped(std::vector<int> s) const {
    if (count(s) != size()) throw std::invalid_argument("tensor: reshape changes element count");
    TensorT out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  static std::string shape_str(const std::vector<int>& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
    return r + "]";
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {

// All three kernels partition work by output row and tile loops so hot rows
// stay cached. Each output element is one sequential reduction in a fixed
// index order (tiling never reorders it), so results are bit-identical for
// any thread count.
constexpr std::int64_t kParallelFlops = 1 << 21;
constexpr std::int64_t kRowBlock = 8;

// C[m,n] += A[m,k] * B[k,n]   (or assignment when accumulate == false)
template <typename T>
void matmul(const T* __restrict__ A, const T* __restrict__ B, T* __restrict__ C, std::int64_t m,
            std::int64_t k, std::int64_t n, bool accumulate) {
  auto rows = [=](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i0 = r0; i0 < r1; i0 += kRowBlock) {
      const std::int64_t i1 = std::min(r1, i0 + kRowBlock);
      if (!accumulate)
        for (std::int64_t i = i0; i < i1; ++i)
          for (std::int64_t j = 0; j < n; ++j) C[i * n + j] = T(0);
      for (std::int64_t l = 0; l < k; ++l) {
        const T* __restrict__ b = B + l * n;
        for (std::int64_t i = i0; i < i1; ++i) {
          const T al = A[i * k + l];
          T* __restrict__ c = C + i * n;
          for (std::int64_t j = 0; j < n; ++j) c[j] += al * b[j];
        }
      }
    }
  };
  if (m * k * n >= kParallelFlops && m > 1)
    parallel_for(m, rows);
  else
    rows(0, m);
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename T>
void matmul_at_b(const T* __restrict__ A, const T* __restrict__ B, T* __restrict__ C,
                 std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
  auto rows = [=](std::int64_t r0, std::int64_t r1) {
    if (!accumulate)
      for (std::int64_t r = r0; r < r1; ++r)
        for (std::int64_t j = 0; j < n; ++j) C[r * n + j] = T(0);
    for (std::int64_t i0 = 0; i0 < m; i0 += kRowBlock) {
      const std::int64_t i1 = std::min(m, i0 + kRowBlock);
      for (std::int64_t r = r0; r < r1; ++r) {
        T* __restrict__ c = C + r * n;
        for (std::int64_t i = i0; i < i1; ++i) {
          const T a = A[i * k + r];
          const T* __restrict__ b = B + i * n;
          for (std::int64_t j = 0; j < n; ++j) c[j] += a * b[j];
        }
      }
    }
  };
  if (m * k * n >= kParallelFlops && k > 1)
    parallel_for(k, rows);
  else
    rows(0, k);
}

// C[m,k] += A[m,n] * B[k,n]^T. B is transposed into a scratch buffer so the
// inner loop is an elementwise update rather than a scalar reduction, which
// keeps it vectorizable without reassociating any per-element sum.
template <typename T>
void matmul_a_bt(const T* __restrict__ A, const T* B, T* __restrict__ C, std::int64_t m,
                 std::int64_t n, std::int64_t k, bool accumulate) {
  std::vector<T> bt(static_cast<std::size_t>(n) * k);
  for (std::int64_t l = 0; l < k; ++l)
    for (std::int64_t j = 0; j < n; ++j) bt[static_cast<std::size_t>(j) * k + l] = B[l * n + j];
  matmul(A, bt.data(), C, m, n, k, accumulate);
}

}  // namespace detail

}  // namespace neuroframe
