#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/features.hpp"
#include "neuroframe/linalg.hpp"

namespace neuroframe {

// k(x, y) = (gamma * <x,y> + offset)^degree. gamma <= 0 means "resolve to
// 1/input_dim at fit time".
struct KernelConfig {
  int degree = 3;
  double gamma = 0.0;
  double offset = 1.0;

  void validate() const {
    if (degree < 1) throw std::invalid_argument("kernel config: degree must be >= 1");
    if (offset < 0.0) throw std::invalid_argument("kernel config: offset must be >= 0");
  }
};

namespace detail {

inline double pow_int(double base, int exp) {
  double out = 1.0;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

}  // namespace detail

inline double poly_kernel(std::span<const double> x, std::span<const double> y,
                          const KernelConfig& cfg) {
  if (x.size() != y.size()) throw std::invalid_argument("poly_kernel: dimension mismatch");
  cfg.validate();
  const double gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / static_cast<double>(x.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  return detail::pow_int(gamma * dot + cfg.offset, cfg.degree);
}

// Fitted kernel-PCA state. Inputs are standardized per column before kernel
// evaluation; the Gram matrix is built over an evenly subsampled subset when
// the training set exceeds subsample_cap rows.
struct KpcaModel {
  int input_dim = 0;
  int train_rows = 0;  // rows actually kept for the Gram matrix
  int out_dim = 0;
  int subsample_cap = 0;
  KernelConfig kernel;
  std::vector<double> feature_mean;    // D
  std::vector<double> feature_std;     // D
  std::vector<double> training_matrix; // train_rows x D, standardized
  std::vector<double> kernel_row_means;  // train_rows
  double kernel_grand_mean = 0.0;
  double positive_spectrum_sum = 0.0;  // denominator for explained variance
  std::vector<double> eigenvalues;       // out_dim, descending
  std::vector<double> coefficient_matrix;  // train_rows x out_dim, v_i / sqrt(lambda_i)
};

namespace detail {

inline void standardize_row(const KpcaModel& model, std::span<const double> x,
                            std::vector<double>& out) {
  out.resize(x.size());
  for (std::size_t d = 0; d < x.size(); ++d)
    out[d] = (x[d] - model.feature_mean[d]) / model.feature_std[d];
}

}  // namespace detail

inline KpcaModel kpca_fit(const std::vector<double>& X, int rows, int dim, int out_dim,
                          KernelConfig cfg, int subsample_cap = 2000) {
  if (rows <= 0 || dim <= 0 || static_cast<std::int64_t>(X.size()) != static_cast<std::int64_t>(rows) * dim)
    throw std::invalid_argument("kpca_fit: bad matrix dimensions");
  if (out_dim < 1 || rows <= out_dim)
    throw std::invalid_argument("kpca_fit: need rows > out_dim >= 1");
  if (subsample_cap < 2) throw std::invalid_argument("kpca_fit: subsample cap must be >= 2");
  cfg.validate();
  for (double v : X)
    if (!std::isfinite(v)) throw std::invalid_argument("kpca_fit: non-finite input");
  if (cfg.gamma <= 0.0) cfg.gamma = 1.0 / static_cast<double>(dim);

  KpcaModel model;
  model.input_dim = dim;
  model.out_dim = out_dim;
  model.kernel = cfg;
  model.subsample_cap = subsample_cap;

  // Column standardization over the full training set (population std).
  model.feature_mean.assign(static_cast<std::size_t>(dim), 0.0);
  model.feature_std.assign(static_cast<std::size_t>(dim), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int d = 0; d < dim; ++d)
      model.feature_mean[static_cast<std::size_t>(d)] += X[static_cast<std::size_t>(r) * dim + d];
  for (int d = 0; d < dim; ++d) model.feature_mean[static_cast<std::size_t>(d)] /= rows;
  for (int r = 0; r < rows; ++r)
    for (int d = 0; d < dim; ++d) {
      const double delta = X[static_cast<std::size_t>(r) * dim + d] - model.feature_mean[static_cast<std::size_t>(d)];
      model.feature_std[static_cast<std::size_t>(d)] += delta * delta;
    }
  for (int d = 0; d < dim; ++d) {
    double& s = model.feature_std[static_cast<std::size_t>(d)];
    s = std::sqrt(s / rows);
    if (s < 1e-12) s = 1.0;  // constant column maps to 0
  }

  // Evenly spaced subsample keeps fitting deterministic.
  const int m = std::min(rows, subsample_cap);
  if (m <= out_dim) throw std::invalid_argument("kpca_fit: subsample cap must exceed out_dim");
  model.train_rows = m;
  model.training_matrix.resize(static_cast<std::size_t>(m) * dim);
  for (int i = 0; i < m; ++i) {
    const int src = m == 1 ? 0
                           : static_cast<int>((static_cast<std::int64_t>(i) * (rows - 1)) / (m - 1));
    for (int d = 0; d < dim; ++d)
      model.training_matrix[static_cast<std::size_t>(i) * dim + d] =
          (X[static_cast<std::size_t>(src) * dim + d] - model.feature_mean[static_cast<std::size_t>(d)]) /
          model.feature_std[static_cast<std::size_t>(d)];
  }

  // Gram matrix and double centering.
  std::vector<double> K(static_cast<std::size_t>(m) * m);
  const double* T = model.training_matrix.data();
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double dot = 0.0;
      const double* xi = T + static_cast<std::size_t>(i) * dim;
      const double* xj = T + static_cast<std::size_t>(j) * dim;
      for (int d = 0; d < dim; ++d) dot += xi[d] * xj[d];
      const double k = detail::pow_int(cfg.gamma * dot + cfg.offset, cfg.degree);
      K[static_cast<std::size_t>(i) * m + j] = k;
      K[static_cast<std::size_t>(j) * m + i] = k;
    }
  }
  model.kernel_row_means.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += K[static_cast<std::size_t>(i) * m + j];
    model.kernel_row_means[static_cast<std::size_t>(i)] = acc / m;
  }
  model.kernel_grand_mean = 0.0;
  for (double v : model.kernel_row_means) model.kernel_grand_mean += v;
  model.kernel_grand_mean /= m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      K[static_cast<std::size_t>(i) * m + j] += model.kernel_grand_mean -
                                                model.kernel_row_means[static_cast<std::size_t>(i)] -
                                                model.kernel_row_means[static_cast<std::size_t>(j)];

  EigResult eig = symmetric_eig(K, m);
  const double lambda_max = eig.values.empty() ? 0.0 : eig.values.front();
  if (!(lambda_max > 0.0))
    throw NumericError("kpca_fit: centered Gram matrix has no positive spectrum");
  for (double& lambda : eig.values)
    if (lambda < 0.0) lambda = 0.0;

  model.positive_spectrum_sum = 0.0;
  for (double lambda : eig.values) model.positive_spectrum_sum += lambda;

  const double keep_threshold = 1e-10 * lambda_max;
  int available = 0;
  while (available < m && eig.values[static_cast<std::size_t>(available)] > keep_threshold) ++available;
  if (available < out_dim)
    throw NumericError("kpca_fit: rank deficiency, only " + std::to_string(available) +
                       " usable components for requested " + std::to_string(out_dim));

  model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + out_dim);
  model.coefficient_matrix.resize(static_cast<std::size_t>(m) * out_dim);
  for (int j = 0; j < out_dim; ++j) {
    const double scale = 1.0 / std::sqrt(model.eigenvalues[static_cast<std::size_t>(j)]);
    for (int i = 0; i < m; ++i)
      model.coefficient_matrix[static_cast<std::size_t>(i) * out_dim + j] = eig.vec(i, j) * scale;
  }
  return model;
}

inline std::vector<double> kpca_transform(const KpcaModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.input_dim)
    throw std::invalid_argument("kpca_transform: dimension mismatch");
  std::vector<double> xs;
  detail::standardize_row(model, x, xs);

  const int m = model.train_rows;
  std::vector<double> kx(static_cast<std::size_t>(m));
  double kx_mean = 0.0;
  for (int i = 0; i < m; ++i) {
    double dot = 0.0;
    const double* ti = model.training_matrix.data() + static_cast<std::size_t>(i) * model.input_dim;
    for (int d = 0; d < model.input_dim; ++d) dot += ti[d] * xs[static_cast<std::size_t>(d)];
    kx[static_cast<std::size_t>(i)] = detail::pow_int(model.kernel.gamma * dot + model.kernel.offset,
                                                      model.kernel.degree);
    kx_mean += kx[static_cast<std::size_t>(i)];
  }
  kx_mean /= m;

  std::vector<double> out(static_cast<std::size_t>(model.out_dim), 0.0);
  for (int i = 0; i < m; ++i) {
    const double centered = kx[static_cast<std::size_t>(i)] - kx_mean -
                            model.kernel_row_means[static_cast<std::size_t>(i)] +
                            model.kernel_grand_mean;
    const double* coef = model.coefficient_matrix.data() + static_cast<std::size_t>(i) * model.out_dim;
    for (int j = 0; j < model.out_dim; ++j) out[static_cast<std::size_t>(j)] += centered * coef[j];
  }
  return out;
}

// Projects every row of a feature sequence; output columns are kpc0..kpcK.
inline FeatureSequence kpca_transform_rows(const KpcaModel& model, const FeatureSequence& in) {
  FeatureSequence out;
  out.rate = in.rate;
  out.dim = model.out_dim;
  out.rows = in.rows;
  out.subject_id = in.subject_id;
  out.data.resize(static_cast<std::size_t>(in.rows) * model.out_dim);
  out.names.reserve(static_cast<std::size_t>(model.out_dim));
  for (int j = 0; j < model.out_dim; ++j) out.names.push_back("kpc" + std::to_string(j));
  for (std::int64_t r = 0; r < in.rows; ++r) {
    const auto projected = kpca_transform(model, std::span<const double>(in.row(r), static_cast<std::size_t>(in.dim)));
    std::copy(projected.begin(), projected.end(),
              out.data.begin() + static_cast<std::size_t>(r) * model.out_dim);
  }
  return out;
}

// Prefix sums of the retained eigenvalues over the whole positive spectrum.
inline std::vector<double> cumulative_explained_variance(const KpcaModel& model) {
  if (model.eigenvalues.empty() || !(model.positive_spectrum_sum > 0.0))
    throw std::invalid_argument("cumulative_explained_variance: model is not fitted");
  std::vector<double> out;
  out.reserve(model.eigenvalues.size());
  double acc = 0.0;
  for (double lambda : model.eigenvalues) {
    acc += lambda;
    out.push_back(acc / model.positive_spectrum_sum);
  }
  return out;
}

}  // namespace neuroframe
