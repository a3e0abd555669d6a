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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace elfatt {

// Row-major matrix of finite doubles with at least one row and one column.
class DenseMatrix {
 public:
  // Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  // Takes ownership of row-major data; throws ShapeError on a length mismatch
  // and OverflowError on a non-finite entry.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix ones(std::size_t rows, std::size_t cols);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

enum class NormKind { Spectral, Frobenius };

const char* to_string(NormKind kind) noexcept;
// Accepts "spectral"/"2" and "frobenius"/"F"; throws ConfigError otherwise.
NormKind parse_norm_kind(const std::string& text);

// Records the largest matrix (in entries) constructed on the current thread
// while the probe is alive. Probes nest; each sees its own peak.
class AllocationProbe {
 public:
  AllocationProbe();
  ~AllocationProbe();
  AllocationProbe(const AllocationProbe&) = delete;
  AllocationProbe& operator=(const AllocationProbe&) = delete;

  std::size_t peak_entries() const noexcept { return peak_; }

 private:
  friend class DenseMatrix;
  std::size_t peak_ = 0;
  AllocationProbe* parent_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T without forming the transpose explicitly.
DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

// Throws OverflowError naming the largest input entry if any exp overflows.
DenseMatrix elementwise_exp(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);

// Horizontal / vertical concatenation. Row (resp. column) counts must agree.
DenseMatrix hcat(std::span<const DenseMatrix> parts);
DenseMatrix hcat(const DenseMatrix& left, const DenseMatrix& right);
DenseMatrix vcat(std::span<const DenseMatrix> parts);
DenseMatrix column_slice(const DenseMatrix& a, std::size_t begin,
                         std::size_t count);
DenseMatrix row_slice(const DenseMatrix& a, std::size_t begin,
                      std::size_t count);

double max_abs(const DenseMatrix& a) noexcept;

// Exact SVD when min(rows, cols) <= kDirectSvdLimit, else power iteration on
// a^T a.
struct SpectralNormOptions {
  double tolerance = 1e-10;  // relative change of the squared estimate
  int max_iterations = 10000;
  unsigned long long seed = 0x5eedULL;
};

struct SpectralNormEstimate {
  double value = 0.0;
  // Relative change of the singular value estimate on the last iteration.
  // Zero for the direct path.
  double gap = 0.0;
  int iterations = 0;
};

inline constexpr std::size_t kDirectSvdLimit = 256;

SpectralNormEstimate spectral_norm(const DenseMatrix& a,
                                   const SpectralNormOptions& options = {});
double frobenius_norm(const DenseMatrix& a) noexcept;
double norm(const DenseMatrix& a, NormKind kind);

// Row-wise softmax of scale * a with the row max subtracted first.
DenseMatrix row_softmax(const DenseMatrix& a, double scale);

}  // namespace elfatt
