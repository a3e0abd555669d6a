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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "elfatt/attention.hpp"
#include "elfatt/matrix.hpp"

namespace elfatt {

// Channel split c = c1 + c2 (first c1 columns go to the global linear head,
// the remaining c2 to the block-sparse head) and the block count b.
struct HeadSplitConfig {
  std::size_t c1 = 0;
  std::size_t c2 = 0;
  std::size_t b = 1;

  // c1 = floor(c/2), c2 = c - c1, b = m / block_length.
  static HeadSplitConfig defaults(std::size_t m, std::size_t c,
                                  std::size_t block_length = 64);

  // Throws ShapeError / DivisibilityError if inconsistent with (m, c).
  void validate(std::size_t m, std::size_t c) const;
  void validate(const AttentionProblem& p) const { validate(p.m(), p.c()); }

  friend bool operator==(const HeadSplitConfig&, const HeadSplitConfig&) = default;
};

// One 3x3 stencil per channel, row-major (dy, dx) with the center at index 4.
class DepthwiseKernel {
 public:
  using Stencil = std::array<double, 9>;

  explicit DepthwiseKernel(std::vector<Stencil> stencils);
  static DepthwiseKernel delta(std::size_t channels);
  static DepthwiseKernel zeros(std::size_t channels);
  // channels x 9 matrix, one stencil per row.
  static DepthwiseKernel from_matrix(const DenseMatrix& weights);

  std::size_t channels() const noexcept { return stencils_.size(); }
  const Stencil& stencil(std::size_t channel) const { return stencils_.at(channel); }
  DepthwiseKernel slice(std::size_t begin, std::size_t count) const;

 private:
  std::vector<Stencil> stencils_;
};

struct QkvProjection {
  DenseMatrix w_q, w_k, w_v;
  QkvProjection(DenseMatrix wq, DenseMatrix wk, DenseMatrix wv);
};

// Q = H W_Q, K = H W_K, V = H W_V.
AttentionProblem project_qkv(const DenseMatrix& h, const QkvProjection& proj,
                             std::optional<Grid> grid = std::nullopt);

struct ChannelSplit {
  std::optional<AttentionProblem> barred;  // first c1 channels
  std::optional<AttentionProblem> tilded;  // last c2 channels
};

ChannelSplit split_channels(const AttentionProblem& p, const HeadSplitConfig& cfg);
AttentionProblem concat_channels(const ChannelSplit& split);

// Contiguous row blocks [i*m/b, (i+1)*m/b). Throws DivisibilityError if b does
// not divide m; there is no padding.
std::vector<DenseMatrix> blockify(const DenseMatrix& a, std::size_t b);
DenseMatrix unblockify(std::span<const DenseMatrix> blocks);

// Vanilla attention inside each block, reassembled in block order. In RawExp
// this equals (exp(QK^T) (.) Z) V for Z = I_b (x) U_(m/b).
DenseMatrix block_sparse_head(const AttentionProblem& tilded, std::size_t b,
                              AttentionMode mode);

// RawExp: exp(Q) (exp(K)^T V) with no 1/c prefactor. Normalized: the
// row-normalized form, where the prefactor would cancel anyway.
DenseMatrix global_linear_head(const AttentionProblem& barred, AttentionMode mode);

// Depthwise 3x3 cross-correlation with zero padding. Each column of v is
// viewed as a grid.height x grid.width image in row-major token order.
DenseMatrix lepe(const DenseMatrix& v, Grid grid, const DepthwiseKernel& kernel);

// Where the sparse head's positional term is applied.
enum class LepeScope {
  PerBlock,  // L(f(V~)) on each block as a 1 x (m/b) strip, zero padded
  FullGrid,  // L(V~) on the whole grid, added after unblockify
};

// Concatenation of the global linear head over the first c1 channels and the
// block-sparse head over the last c2. Normalized mode resolves an unset scale
// per head (1/sqrt(c1), 1/sqrt(c2)). A kernel adds LePE to both heads and
// requires p.grid().
DenseMatrix elfatt_forward(const AttentionProblem& p, const HeadSplitConfig& cfg,
                           AttentionMode mode,
                           const std::optional<DepthwiseKernel>& kernel = std::nullopt,
                           LepeScope scope = LepeScope::PerBlock);

// [vanilla(barred), vanilla(tilded)]: the two-head target ELFATT approximates.
DenseMatrix double_head_reference(const AttentionProblem& p,
                                  const HeadSplitConfig& cfg, AttentionMode mode);

// Splits channels into s equal groups and runs elfatt_forward on each. cfgs
// holds either one config shared by all groups or exactly s configs. A kernel
// must cover all c channels and is sliced per group.
DenseMatrix multi_head_elfatt(const AttentionProblem& p, std::size_t s,
                              std::span<const HeadSplitConfig> cfgs,
                              AttentionMode mode,
                              const std::optional<DepthwiseKernel>& kernel = std::nullopt,
                              LepeScope scope = LepeScope::PerBlock);

}  // namespace elfatt
