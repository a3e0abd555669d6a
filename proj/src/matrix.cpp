// Copyright 2026 The elfatt Authors
// SPDX-License-Identifier: Apache-2.0
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

#include "elfatt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SVD>

#include "elfatt/error.hpp"
#include "elfatt/parallel.hpp"

namespace elfatt {
namespace {

thread_local AllocationProbe* t_probe = nullptr;

void require_positive_shape(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void require_finite(const DenseMatrix& m, const char* op) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) {
      throw OverflowError(std::string(op) + " produced a non-finite entry (" +
                          m.shape_string() + " result)");
    }
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

template <typename F>
DenseMatrix zip(const DenseMatrix& a, const DenseMatrix& b, const char* op,
                F f) {
  require_same_shape(a, b, op);
  DenseMatrix out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
  require_finite(out, op);
  return out;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols) {
  require_positive_shape(rows, cols);
  data_.assign(rows * cols, 0.0);
  for (auto* p = t_probe; p != nullptr; p = p->parent_) {
    p->peak_ = std::max(p->peak_, data_.size());
  }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive_shape(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match " + shape_string());
  }
  require_finite(*this, "construction");
  for (auto* p = t_probe; p != nullptr; p = p->parent_) {
    p->peak_ = std::max(p->peak_, data_.size());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseMatrix DenseMatrix::ones(std::size_t rows, std::size_t cols) {
  DenseMatrix out(rows, cols);
  std::fill(out.data_.begin(), out.data_.end(), 1.0);
  return out;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix out(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
  require_finite(out, "diagonal");
  return out;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

std::string DenseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

const char* to_string(NormKind kind) noexcept {
  return kind == NormKind::Spectral ? "spectral" : "frobenius";
}

NormKind parse_norm_kind(const std::string& text) {
  if (text == "spectral" || text == "2") return NormKind::Spectral;
  if (text == "frobenius" || text == "F" || text == "fro") {
    return NormKind::Frobenius;
  }
  throw ConfigError("unknown norm '" + text + "' (spectral|frobenius)");
}

AllocationProbe::AllocationProbe() : parent_(t_probe) { t_probe = this; }
AllocationProbe::~AllocationProbe() { t_probe = parent_; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " +
                     b.shape_string());
  }
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto dst = out.row(i);
      auto src = a.row(i);
      for (std::size_t k = 0; k < inner; ++k) {
        const double s = src[k];
        const double* brow = b.row(k).data();
        for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
      }
    }
  });
  require_finite(out, "matmul");
  return out;
}

DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transposed: cannot multiply " + a.shape_string() +
                     " by transpose of " + b.shape_string());
  }
  return matmul(a, transpose(b));
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

DenseMatrix elementwise_exp(const DenseMatrix& a) {
  DenseMatrix out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  parallel_for(src.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) dst[i] = std::exp(src[i]);
  });
  for (double v : dst) {
    if (!std::isfinite(v)) {
      const double hi = *std::max_element(src.begin(), src.end());
      std::ostringstream msg;
      msg.precision(17);
      msg << "elementwise_exp overflow: max input entry " << hi;
      throw OverflowError(msg.str());
    }
  }
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
  DenseMatrix out = a;
  for (double& v : out.data()) v *= factor;
  require_finite(out, "scaled");
  return out;
}

DenseMatrix hcat(std::span<const DenseMatrix> parts) {
  if (parts.empty()) throw ShapeError("hcat: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("hcat: row mismatch " + parts.front().shape_string() +
                       " vs " + p.shape_string());
    }
    cols += p.cols();
  }
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = out.row(i).begin();
    for (const auto& p : parts) dst = std::copy_n(p.row(i).begin(), p.cols(), dst);
  }
  return out;
}

DenseMatrix hcat(const DenseMatrix& left, const DenseMatrix& right) {
  const DenseMatrix parts[] = {left, right};
  return hcat(parts);
}

DenseMatrix vcat(std::span<const DenseMatrix> parts) {
  if (parts.empty()) throw ShapeError("vcat: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("vcat: column mismatch " + parts.front().shape_string() +
                       " vs " + p.shape_string());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) {
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return DenseMatrix(rows, cols, std::move(data));
}

DenseMatrix column_slice(const DenseMatrix& a, std::size_t begin,
                         std::size_t count) {
  if (count == 0 || begin + count > a.cols()) {
    throw ShapeError("column_slice [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     a.shape_string());
  }
  DenseMatrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(a.row(i).begin() + static_cast<std::ptrdiff_t>(begin), count,
                out.row(i).begin());
  }
  return out;
}

DenseMatrix row_slice(const DenseMatrix& a, std::size_t begin,
                      std::size_t count) {
  if (count == 0 || begin + count > a.rows()) {
    throw ShapeError("row_slice [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     a.shape_string());
  }
  auto first = a.data().begin() + static_cast<std::ptrdiff_t>(begin * a.cols());
  const auto last = first + static_cast<std::ptrdiff_t>(count * a.cols());
  return DenseMatrix(count, a.cols(), std::vector<double>(first, last));
}

double max_abs(const DenseMatrix& a) noexcept {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

SpectralNormEstimate spectral_norm(const DenseMatrix& a,
                                   const SpectralNormOptions& options) {
  const std::size_t n = a.cols();
  const std::size_t m = a.rows();
  if (std::min(m, n) <= kDirectSvdLimit) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        view(a.data().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(view);
    return {svd.singularValues()(0), 0.0, 0};
  }

  std::vector<double> x(n), y(m), z(n);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  for (double& v : x) v = dist(rng);

  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& e : v) e /= s;
    }
    return s;
  };
  normalize(x);

  double lambda = -1.0;
  double last_gap = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    // y = a x, z = a^T y; with |x| = 1 the Rayleigh quotient is |y|^2.
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      auto r = a.row(i);
      for (std::size_t j = 0; j < n; ++j) s += r[j] * x[j];
      y[i] = s;
    }
    std::fill(z.begin(), z.end(), 0.0);
    double next = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      next += y[i] * y[i];
      auto r = a.row(i);
      for (std::size_t j = 0; j < n; ++j) z[j] += r[j] * y[i];
    }
    if (next == 0.0) return {0.0, 0.0, it};
    const double change = lambda < 0.0 ? 1.0 : std::abs(next - lambda) / next;
    last_gap = lambda < 0.0 ? 1.0
                            : std::abs(std::sqrt(next) - std::sqrt(lambda)) /
                                  std::sqrt(next);
    lambda = next;
    if (change <= options.tolerance) {
      return {std::sqrt(lambda), last_gap, it};
    }
    if (normalize(z) == 0.0) return {std::sqrt(lambda), 0.0, it};
    x.swap(z);
  }
  throw ConvergenceError(
      "spectral_norm: power iteration did not converge within " +
          std::to_string(options.max_iterations) + " iterations",
      last_gap);
}

double frobenius_norm(const DenseMatrix& a) noexcept {
  // Scaled accumulation guards against overflow in the sum of squares.
  const double scale = max_abs(a);
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double v : a.data()) {
    const double t = v / scale;
    s += t * t;
  }
  return scale * std::sqrt(s);
}

double norm(const DenseMatrix& a, NormKind kind) {
  return kind == NormKind::Spectral ? spectral_norm(a).value : frobenius_norm(a);
}

DenseMatrix row_softmax(const DenseMatrix& a, double scale) {
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i);
    auto dst = out.row(i);
    double hi = scale * src[0];
    for (double v : src) hi = std::max(hi, scale * v);
    double sum = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      dst[j] = std::exp(scale * src[j] - hi);
      sum += dst[j];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

}  // namespace elfatt
