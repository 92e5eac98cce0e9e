#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "neuroframe/common.hpp"

namespace neuroframe {

// Eigenvalues in descending order; vectors stored row-major with column j the
// unit eigenvector of values[j].
struct EigResult {
  std::vector<double> values;
  std::vector<double> vectors;
  int n = 0;

  double vec(int row, int col) const { return vectors[static_cast<std::size_t>(row) * n + col]; }
};

// Cyclic Jacobi for symmetric matrices. Sweeps until every off-diagonal
// magnitude drops below 1e-12 * ||M||_F.
inline EigResult symmetric_eig(const std::vector<double>& M, int n) {
  if (n <= 0 || static_cast<std::int64_t>(M.size()) != static_cast<std::int64_t>(n) * n)
    throw std::invalid_argument("symmetric_eig: bad dimensions");
  double max_abs = 0.0;
  for (double v : M) max_abs = std::max(max_abs, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(M[static_cast<std::size_t>(i) * n + j] - M[static_cast<std::size_t>(j) * n + i]) >
          1e-10 * std::max(1.0, max_abs))
        throw std::invalid_argument("symmetric_eig: matrix is not symmetric");

  std::vector<double> A = M;
  std::vector<double> V(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) V[static_cast<std::size_t>(i) * n + i] = 1.0;
  auto a = [&](int i, int j) -> double& { return A[static_cast<std::size_t>(i) * n + j]; };
  auto v = [&](int i, int j) -> double& { return V[static_cast<std::size_t>(i) * n + j]; };

  double frob = 0.0;
  for (double x : M) frob += x * x;
  frob = std::sqrt(frob);
  const double threshold = 1e-12 * frob;

  const int max_sweeps = 100;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off_max = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off_max = std::max(off_max, std::abs(a(p, q)));
    if (off_max <= threshold) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= threshold * 0.01) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int i = 0; i < n; ++i) {
          if (i != p && i != q) {
            const double aip = a(i, p), aiq = a(i, q);
            a(i, p) = c * aip - s * aiq;
            a(p, i) = a(i, p);
            a(i, q) = s * aip + c * aiq;
            a(q, i) = a(i, q);
          }
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (sweep == max_sweeps) throw NumericError("symmetric_eig: Jacobi did not converge");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) > a(j, j); });

  EigResult out;
  out.n = n;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    out.values[static_cast<std::size_t>(j)] = a(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
    for (int i = 0; i < n; ++i)
      out.vectors[static_cast<std::size_t>(i) * n + j] = v(i, order[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace neuroframe
