// Copyright 2026 The samhead Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "samhead/error.hpp"

namespace samhead {

// Linear projector x -> basis * (x - mean). `basis` is output_dim x input_dim,
// row-major, rows orthonormal. `eigenvalues` holds the retained variances in
// descending order; `energy` is their share of the total variance.
struct PcaProjector {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> mean;
  std::vector<double> basis;
  std::vector<double> eigenvalues;
  double energy = 1.0;
  // Dimension asked for; larger than output_dim when the data rank was short.
  std::size_t requested_dim = 0;
  // Basis is the leading rows of I and the mean is zero.
  bool identity = false;

  bool rank_limited() const { return requested_dim > output_dim; }

  void validate() const {
    if (input_dim == 0 || output_dim == 0 || output_dim > input_dim)
      throw Error(ErrorCode::kDimensionMismatch, "projector needs 0 < d <= D");
    if (mean.size() != input_dim || basis.size() != input_dim * output_dim ||
        eigenvalues.size() != output_dim)
      throw Error(ErrorCode::kDimensionMismatch, "projector array sizes inconsistent");
  }

  bool operator==(const PcaProjector&) const = default;
};

// Identity on the first d coordinates with zero mean.
inline PcaProjector identity_projector(std::size_t input_dim, std::size_t output_dim = 0) {
  if (output_dim == 0) output_dim = input_dim;
  if (input_dim == 0 || output_dim > input_dim)
    throw Error(ErrorCode::kInvalidArgument, "identity projector needs 0 < d <= D");
  PcaProjector p;
  p.input_dim = input_dim;
  p.output_dim = output_dim;
  p.requested_dim = output_dim;
  p.mean.assign(input_dim, 0.0);
  p.basis.assign(input_dim * output_dim, 0.0);
  for (std::size_t k = 0; k < output_dim; ++k) p.basis[k * input_dim + k] = 1.0;
  p.eigenvalues.assign(output_dim, 1.0);
  p.energy = static_cast<double>(output_dim) / static_cast<double>(input_dim);
  p.identity = true;
  return p;
}

// True when `p` is exactly what identity_projector would build.
inline bool is_identity_projector(const PcaProjector& p) {
  for (double m : p.mean)
    if (m != 0.0) return false;
  for (std::size_t k = 0; k < p.output_dim; ++k)
    for (std::size_t i = 0; i < p.input_dim; ++i)
      if (p.basis[k * p.input_dim + i] != (i == k ? 1.0 : 0.0)) return false;
  return true;
}

// Either a fixed output dimension or the smallest dimension whose retained
// variance share reaches `energy`.
struct PcaTarget {
  std::size_t dim = 0;
  double energy = 0.0;

  static PcaTarget dimension(std::size_t d) { return {d, 0.0}; }
  static PcaTarget energy_fraction(double e) { return {0, e}; }
};

// Samples are rows of a row-major N x dim matrix.
inline PcaProjector pca_fit(std::span<const double> samples, std::size_t dim, PcaTarget target) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "sample dimension must be positive");
  if (samples.size() % dim != 0)
    throw Error(ErrorCode::kDimensionMismatch, "sample buffer is not a multiple of dim");
  const std::size_t n = samples.size() / dim;
  if (n < 2) throw Error(ErrorCode::kInsufficientSamples, "PCA needs at least 2 samples");
  if (target.dim == 0 && !(target.energy > 0.0 && target.energy <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "PCA target needs d >= 1 or energy in (0,1]");
  if (target.dim > dim)
    throw Error(ErrorCode::kInvalidArgument, "PCA target dimension exceeds input dimension");

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrix> x(samples.data(), static_cast<Eigen::Index>(n),
                                static_cast<Eigen::Index>(dim));
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  const RowMatrix centered = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::kInternal, "eigendecomposition failed");
  // Eigen returns ascending eigenvalues; walk from the back.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  std::vector<double> desc(dim);
  for (std::size_t k = 0; k < dim; ++k)
    desc[k] = std::max(0.0, evals(static_cast<Eigen::Index>(dim - 1 - k)));
  double total = 0.0;
  for (double v : desc) total += v;

  const double tol = desc.empty() ? 0.0 : desc[0] * 1e-12;
  std::size_t rank = 0;
  while (rank < dim && desc[rank] > tol) ++rank;
  rank = std::max<std::size_t>(rank, 1);

  std::size_t want = target.dim;
  if (want == 0) {
    double acc = 0.0;
    want = dim;
    for (std::size_t k = 0; k < dim; ++k) {
      acc += desc[k];
      if (total <= 0.0 || acc >= target.energy * total - 1e-15 * total) {
        want = k + 1;
        break;
      }
    }
  }
  const std::size_t keep = std::min(want, rank);

  PcaProjector p;
  p.input_dim = dim;
  p.output_dim = keep;
  p.requested_dim = want;
  p.mean.assign(mean.data(), mean.data() + dim);
  p.basis.resize(keep * dim);
  p.eigenvalues.resize(keep);
  double kept = 0.0;
  for (std::size_t k = 0; k < keep; ++k) {
    const auto col = static_cast<Eigen::Index>(dim - 1 - k);
    Eigen::VectorXd v = evecs.col(col);
    v.normalize();
    // Sign convention: first non-negligible component positive.
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    for (std::size_t i = 0; i < dim; ++i) p.basis[k * dim + i] = v(static_cast<Eigen::Index>(i));
    p.eigenvalues[k] = desc[k];
    kept += desc[k];
  }
  p.energy = total > 0.0 ? kept / total : 1.0;
  return p;
}

inline PcaProjector pca_fit(const std::vector<std::vector<double>>& samples, PcaTarget target) {
  if (samples.empty()) throw Error(ErrorCode::kInsufficientSamples, "PCA needs samples");
  const std::size_t dim = samples.front().size();
  std::vector<double> flat;
  flat.reserve(samples.size() * dim);
  for (const auto& s : samples) {
    if (s.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "samples differ in length");
    flat.insert(flat.end(), s.begin(), s.end());
  }
  return pca_fit(flat, dim, target);
}

template <typename T>
void pca_project_into(const PcaProjector& p, std::span<const T> v, std::span<double> out) {
  if (v.size() != p.input_dim)
    throw Error(ErrorCode::kDimensionMismatch, "vector length does not match projector input");
  if (out.size() != p.output_dim)
    throw Error(ErrorCode::kDimensionMismatch, "output length does not match projector output");
  const std::size_t d = p.input_dim;
  for (std::size_t k = 0; k < p.output_dim; ++k) {
    const double* row = p.basis.data() + k * d;
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += row[i] * (static_cast<double>(v[i]) - p.mean[i]);
    out[k] = acc;
  }
}

// Projects `rows` (n x input_dim, row-major) into `out` (n x output_dim).
template <typename T>
void pca_project_rows(const PcaProjector& p, std::span<const T> rows, std::span<double> out) {
  const std::size_t d = p.input_dim;
  if (d == 0 || rows.size() % d != 0)
    throw Error(ErrorCode::kDimensionMismatch, "row block length does not match projector input");
  const std::size_t n = rows.size() / d;
  if (out.size() != n * p.output_dim)
    throw Error(ErrorCode::kDimensionMismatch, "output length does not match projector output");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowMajorT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajorT> x(rows.data(), static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(d));
  const Eigen::Map<const Eigen::RowVectorXd> mean(p.mean.data(), static_cast<Eigen::Index>(d));
  const Eigen::Map<const RowMajor> basis(p.basis.data(), static_cast<Eigen::Index>(p.output_dim),
                                         static_cast<Eigen::Index>(d));
  Eigen::Map<RowMajor> y(out.data(), static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(p.output_dim));
  if (p.identity) {
    y = x.leftCols(static_cast<Eigen::Index>(p.output_dim)).template cast<double>();
    return;
  }
  const RowMajor centered = x.template cast<double>().rowwise() - mean;
  y.noalias() = centered * basis.transpose();
}

inline std::vector<double> pca_project(const PcaProjector& p, std::span<const double> v) {
  std::vector<double> out(p.output_dim);
  pca_project_into<double>(p, v, out);
  return out;
}

// Max-norm of basis * basis^T - I.
inline double orthonormality_error(const PcaProjector& p) {
  double worst = 0.0;
  for (std::size_t a = 0; a < p.output_dim; ++a)
    for (std::size_t b = 0; b < p.output_dim; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < p.input_dim; ++i)
        dot += p.basis[a * p.input_dim + i] * p.basis[b * p.input_dim + i];
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace samhead
