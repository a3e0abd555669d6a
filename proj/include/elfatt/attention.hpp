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
#include <optional>

#include "elfatt/matrix.hpp"

namespace elfatt {

// 2D token layout; height * width must equal the sequence length.
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const Grid&, const Grid&) = default;
};

// Q, K, V of identical shape m x c, optionally tagged with a token grid.
class AttentionProblem {
 public:
  AttentionProblem(DenseMatrix q, DenseMatrix k, DenseMatrix v,
                   std::optional<Grid> grid = std::nullopt);

  const DenseMatrix& q() const noexcept { return q_; }
  const DenseMatrix& k() const noexcept { return k_; }
  const DenseMatrix& v() const noexcept { return v_; }
  const std::optional<Grid>& grid() const noexcept { return grid_; }
  std::size_t m() const noexcept { return q_.rows(); }
  std::size_t c() const noexcept { return q_.cols(); }

  // Same q and k with a different value matrix (shape must match).
  AttentionProblem with_values(DenseMatrix v) const;

 private:
  DenseMatrix q_, k_, v_;
  std::optional<Grid> grid_;
};

// RawExp evaluates exp(QK^T)V literally; Normalized applies a row softmax to
// scale * QK^T. An unset scale resolves to 1/sqrt(c).
class AttentionMode {
 public:
  enum class Kind { RawExp, Normalized };

  static AttentionMode raw_exp() { return AttentionMode(Kind::RawExp, {}); }
  static AttentionMode normalized(std::optional<double> scale = std::nullopt);

  Kind kind() const noexcept { return kind_; }
  bool is_raw() const noexcept { return kind_ == Kind::RawExp; }
  std::optional<double> scale() const noexcept { return scale_; }
  double resolved_scale(std::size_t c) const;

 private:
  AttentionMode(Kind kind, std::optional<double> scale)
      : kind_(kind), scale_(scale) {}
  Kind kind_;
  std::optional<double> scale_;
};

// Z = I_b (x) U_(m/b): token i may attend to token j iff both sit in the same
// contiguous block of length m/b. Never materialized unless asked.
class BlockMask {
 public:
  BlockMask(std::size_t m, std::size_t b);

  std::size_t m() const noexcept { return m_; }
  std::size_t b() const noexcept { return b_; }
  std::size_t block_length() const noexcept { return m_ / b_; }
  bool allows(std::size_t i, std::size_t j) const noexcept {
    return i / block_length() == j / block_length();
  }
  DenseMatrix materialize() const;

 private:
  std::size_t m_, b_;
};

DenseMatrix vanilla_attention(const AttentionProblem& p, AttentionMode mode);

// Attention restricted to mask.allows(i, j). In Normalized mode the softmax
// runs over the allowed keys of each row only.
DenseMatrix masked_vanilla_attention(const AttentionProblem& p,
                                     const BlockMask& mask, AttentionMode mode);

}  // namespace elfatt
