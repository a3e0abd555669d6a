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

#include "elfatt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "elfatt/error.hpp"
#include "elfatt/parallel.hpp"

namespace elfatt {

AttentionProblem::AttentionProblem(DenseMatrix q, DenseMatrix k, DenseMatrix v,
                                   std::optional<Grid> grid)
    : q_(std::move(q)), k_(std::move(k)), v_(std::move(v)), grid_(grid) {
  if (q_.rows() != k_.rows() || q_.rows() != v_.rows() ||
      q_.cols() != k_.cols() || q_.cols() != v_.cols()) {
    throw ShapeError("attention problem: Q " + q_.shape_string() + ", K " +
                     k_.shape_string() + ", V " + v_.shape_string() +
                     " must share one shape");
  }
  if (grid_ && grid_->height * grid_->width != q_.rows()) {
    throw ShapeError("grid " + std::to_string(grid_->height) + "x" +
                     std::to_string(grid_->width) + " does not cover m=" +
                     std::to_string(q_.rows()) + " tokens");
  }
}

AttentionProblem AttentionProblem::with_values(DenseMatrix v) const {
  return AttentionProblem(q_, k_, std::move(v), grid_);
}

AttentionMode AttentionMode::normalized(std::optional<double> scale) {
  if (scale && !(std::isfinite(*scale) && *scale > 0.0)) {
    throw ConfigError("normalized attention scale must be finite and positive");
  }
  return AttentionMode(Kind::Normalized, scale);
}

double AttentionMode::resolved_scale(std::size_t c) const {
  return scale_.value_or(1.0 / std::sqrt(static_cast<double>(c)));
}

BlockMask::BlockMask(std::size_t m, std::size_t b) : m_(m), b_(b) {
  if (b == 0 || m == 0 || m % b != 0) {
    throw DivisibilityError("block count " + std::to_string(b) +
                            " does not divide sequence length " +
                            std::to_string(m));
  }
}

DenseMatrix BlockMask::materialize() const {
  DenseMatrix z(m_, m_);
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t j = 0; j < m_; ++j) z(i, j) = allows(i, j) ? 1.0 : 0.0;
  }
  return z;
}

DenseMatrix vanilla_attention(const AttentionProblem& p, AttentionMode mode) {
  const DenseMatrix scores = matmul_transposed(p.q(), p.k());
  if (mode.is_raw()) return matmul(elementwise_exp(scores), p.v());
  return matmul(row_softmax(scores, mode.resolved_scale(p.c())), p.v());
}

DenseMatrix masked_vanilla_attention(const AttentionProblem& p,
                                     const BlockMask& mask,
                                     AttentionMode mode) {
  if (mask.m() != p.m()) {
    throw ShapeError("block mask covers m=" + std::to_string(mask.m()) +
                     " but problem has m=" + std::to_string(p.m()));
  }
  const DenseMatrix scores = matmul_transposed(p.q(), p.k());
  if (mode.is_raw()) {
    return matmul(hadamard(elementwise_exp(scores), mask.materialize()), p.v());
  }
  // Same arithmetic as row_softmax, skipping masked-out keys.
  const double scale = mode.resolved_scale(p.c());
  DenseMatrix weights(p.m(), p.m());
  parallel_for(p.m(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto src = scores.row(i);
      auto dst = weights.row(i);
      double hi = -INFINITY;
      for (std::size_t j = 0; j < src.size(); ++j) {
        if (mask.allows(i, j)) hi = std::max(hi, scale * src[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < src.size(); ++j) {
        dst[j] = mask.allows(i, j) ? std::exp(scale * src[j] - hi) : 0.0;
        sum += dst[j];
      }
      for (double& w : dst) w /= sum;
    }
  });
  return matmul(weights, p.v());
}

}  // namespace elfatt
