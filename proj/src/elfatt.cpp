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

#include "elfatt/elfatt.hpp"

#include <string>

#include "elfatt/error.hpp"
#include "elfatt/kernel_approx.hpp"

namespace elfatt {
namespace {

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

AttentionProblem slice_channels(const AttentionProblem& p, std::size_t begin,
                                std::size_t count) {
  return AttentionProblem(column_slice(p.q(), begin, count),
                          column_slice(p.k(), begin, count),
                          column_slice(p.v(), begin, count), p.grid());
}

DenseMatrix sparse_head_impl(const AttentionProblem& tilded, std::size_t b,
                             AttentionMode mode, const DepthwiseKernel* kernel) {
  const auto qs = blockify(tilded.q(), b);
  const auto ks = blockify(tilded.k(), b);
  const auto vs = blockify(tilded.v(), b);
  std::vector<DenseMatrix> outs;
  outs.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    DenseMatrix out = vanilla_attention(AttentionProblem(qs[i], ks[i], vs[i]), mode);
    if (kernel != nullptr) {
      out = add(out, lepe(vs[i], Grid{1, vs[i].rows()}, *kernel));
    }
    outs.push_back(std::move(out));
  }
  return unblockify(outs);
}

}  // namespace

HeadSplitConfig HeadSplitConfig::defaults(std::size_t m, std::size_t c,
                                          std::size_t block_length) {
  if (block_length == 0 || m % block_length != 0) {
    throw DivisibilityError("block length " + std::to_string(block_length) +
                            " does not divide sequence length " +
                            std::to_string(m));
  }
  HeadSplitConfig cfg{c / 2, c - c / 2, m / block_length};
  cfg.validate(m, c);
  return cfg;
}

void HeadSplitConfig::validate(std::size_t m, std::size_t c) const {
  if (c1 + c2 != c) {
    throw ShapeError("head split c1=" + std::to_string(c1) + " + c2=" +
                     std::to_string(c2) + " does not equal c=" + std::to_string(c));
  }
  if (c1 == 0 && c2 == 0) throw ShapeError("head split needs c1 + c2 > 0");
  if (b == 0) throw DivisibilityError("block count must be at least 1");
  if (c2 > 0 && m % b != 0) {
    throw DivisibilityError("block count " + std::to_string(b) +
                            " does not divide sequence length " +
                            std::to_string(m));
  }
}

DepthwiseKernel::DepthwiseKernel(std::vector<Stencil> stencils)
    : stencils_(std::move(stencils)) {
  if (stencils_.empty()) throw ShapeError("depthwise kernel needs >= 1 channel");
}

DepthwiseKernel DepthwiseKernel::delta(std::size_t channels) {
  Stencil s{};
  s[4] = 1.0;
  return DepthwiseKernel(std::vector<Stencil>(channels, s));
}

DepthwiseKernel DepthwiseKernel::zeros(std::size_t channels) {
  return DepthwiseKernel(std::vector<Stencil>(channels, Stencil{}));
}

DepthwiseKernel DepthwiseKernel::from_matrix(const DenseMatrix& weights) {
  if (weights.cols() != 9) {
    throw ShapeError("depthwise kernel matrix must be channels x 9, got " +
                     weights.shape_string());
  }
  std::vector<Stencil> stencils(weights.rows());
  for (std::size_t ch = 0; ch < weights.rows(); ++ch) {
    for (std::size_t t = 0; t < 9; ++t) stencils[ch][t] = weights(ch, t);
  }
  return DepthwiseKernel(std::move(stencils));
}

DepthwiseKernel DepthwiseKernel::slice(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > stencils_.size()) {
    throw ShapeError("kernel slice out of range");
  }
  const auto first = stencils_.begin() + static_cast<std::ptrdiff_t>(begin);
  return DepthwiseKernel(
      std::vector<Stencil>(first, first + static_cast<std::ptrdiff_t>(count)));
}

QkvProjection::QkvProjection(DenseMatrix wq, DenseMatrix wk, DenseMatrix wv)
    : w_q(std::move(wq)), w_k(std::move(wk)), w_v(std::move(wv)) {
  if (w_q.rows() != w_k.rows() || w_q.rows() != w_v.rows() ||
      w_q.cols() != w_k.cols() || w_q.cols() != w_v.cols()) {
    throw ShapeError("projections W_Q " + w_q.shape_string() + ", W_K " +
                     w_k.shape_string() + ", W_V " + w_v.shape_string() +
                     " must share one shape");
  }
}

AttentionProblem project_qkv(const DenseMatrix& h, const QkvProjection& proj,
                             std::optional<Grid> grid) {
  if (h.cols() != proj.w_q.rows()) {
    throw ShapeError("embedding " + h.shape_string() +
                     " does not match projections " + proj.w_q.shape_string());
  }
  return AttentionProblem(matmul(h, proj.w_q), matmul(h, proj.w_k),
                          matmul(h, proj.w_v), grid);
}

ChannelSplit split_channels(const AttentionProblem& p, const HeadSplitConfig& cfg) {
  cfg.validate(p);
  ChannelSplit split;
  if (cfg.c1 > 0) split.barred = slice_channels(p, 0, cfg.c1);
  if (cfg.c2 > 0) split.tilded = slice_channels(p, cfg.c1, cfg.c2);
  return split;
}

AttentionProblem concat_channels(const ChannelSplit& split) {
  if (!split.barred && !split.tilded) throw ShapeError("nothing to concatenate");
  if (!split.barred) return *split.tilded;
  if (!split.tilded) return *split.barred;
  const auto& a = *split.barred;
  const auto& b = *split.tilded;
  return AttentionProblem(hcat(a.q(), b.q()), hcat(a.k(), b.k()),
                          hcat(a.v(), b.v()), a.grid());
}

std::vector<DenseMatrix> blockify(const DenseMatrix& a, std::size_t b) {
  if (b == 0 || a.rows() % b != 0) {
    throw DivisibilityError("block count " + std::to_string(b) +
                            " does not divide " + std::to_string(a.rows()) +
                            " rows");
  }
  const std::size_t len = a.rows() / b;
  std::vector<DenseMatrix> blocks;
  blocks.reserve(b);
  for (std::size_t i = 0; i < b; ++i) blocks.push_back(row_slice(a, i * len, len));
  return blocks;
}

DenseMatrix unblockify(std::span<const DenseMatrix> blocks) {
  if (blocks.empty()) throw ShapeError("unblockify: no blocks");
  for (const auto& blk : blocks) {
    if (blk.rows() != blocks.front().rows() || blk.cols() != blocks.front().cols()) {
      throw ShapeError("unblockify: ragged blocks " +
                       blocks.front().shape_string() + " vs " + blk.shape_string());
    }
  }
  return vcat(blocks);
}

DenseMatrix block_sparse_head(const AttentionProblem& tilded, std::size_t b,
                              AttentionMode mode) {
  return sparse_head_impl(tilded, b, mode, nullptr);
}

DenseMatrix global_linear_head(const AttentionProblem& barred, AttentionMode mode) {
  if (!mode.is_raw()) return effatt_attention(barred, mode);
  const DenseMatrix exp_k = elementwise_exp(barred.k());
  return matmul(elementwise_exp(barred.q()), matmul(transpose(exp_k), barred.v()));
}

DenseMatrix lepe(const DenseMatrix& v, Grid grid, const DepthwiseKernel& kernel) {
  if (grid.height * grid.width != v.rows()) {
    throw ShapeError("LePE grid " + dims(grid.height, grid.width) +
                     " does not cover " + std::to_string(v.rows()) + " tokens");
  }
  if (kernel.channels() != v.cols()) {
    throw ShapeError("LePE kernel has " + std::to_string(kernel.channels()) +
                     " stencils for " + std::to_string(v.cols()) + " channels");
  }
  const auto h = static_cast<std::ptrdiff_t>(grid.height);
  const auto w = static_cast<std::ptrdiff_t>(grid.width);
  DenseMatrix out(v.rows(), v.cols());
  for (std::size_t ch = 0; ch < v.cols(); ++ch) {
    const auto& s = kernel.stencil(ch);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
          const std::ptrdiff_t yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            const std::ptrdiff_t xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            acc += s[static_cast<std::size_t>((dy + 1) * 3 + (dx + 1))] *
                   v(static_cast<std::size_t>(yy * w + xx), ch);
          }
        }
        out(static_cast<std::size_t>(y * w + x), ch) = acc;
      }
    }
  }
  return out;
}

DenseMatrix elfatt_forward(const AttentionProblem& p, const HeadSplitConfig& cfg,
                           AttentionMode mode,
                           const std::optional<DepthwiseKernel>& kernel,
                           LepeScope scope) {
  cfg.validate(p);
  if (kernel) {
    if (!p.grid()) throw ConfigError("LePE requires a token grid on the problem");
    if (kernel->channels() != p.c()) {
      throw ShapeError("LePE kernel has " + std::to_string(kernel->channels()) +
                       " stencils for " + std::to_string(p.c()) + " channels");
    }
  }
  const ChannelSplit split = split_channels(p, cfg);
  std::vector<DenseMatrix> parts;
  if (split.barred) {
    DenseMatrix head = global_linear_head(*split.barred, mode);
    if (kernel) {
      head = add(head, lepe(split.barred->v(), *p.grid(), kernel->slice(0, cfg.c1)));
    }
    parts.push_back(std::move(head));
  }
  if (split.tilded) {
    std::optional<DepthwiseKernel> sparse_kernel;
    if (kernel) sparse_kernel = kernel->slice(cfg.c1, cfg.c2);
    if (sparse_kernel && scope == LepeScope::PerBlock) {
      parts.push_back(sparse_head_impl(*split.tilded, cfg.b, mode, &*sparse_kernel));
    } else {
      DenseMatrix head = sparse_head_impl(*split.tilded, cfg.b, mode, nullptr);
      if (sparse_kernel) {
        head = add(head, lepe(split.tilded->v(), *p.grid(), *sparse_kernel));
      }
      parts.push_back(std::move(head));
    }
  }
  return hcat(parts);
}

DenseMatrix double_head_reference(const AttentionProblem& p,
                                  const HeadSplitConfig& cfg, AttentionMode mode) {
  const ChannelSplit split = split_channels(p, cfg);
  std::vector<DenseMatrix> parts;
  if (split.barred) parts.push_back(vanilla_attention(*split.barred, mode));
  if (split.tilded) parts.push_back(vanilla_attention(*split.tilded, mode));
  return hcat(parts);
}

DenseMatrix multi_head_elfatt(const AttentionProblem& p, std::size_t s,
                              std::span<const HeadSplitConfig> cfgs,
                              AttentionMode mode,
                              const std::optional<DepthwiseKernel>& kernel,
                              LepeScope scope) {
  if (s == 0 || p.c() % s != 0) {
    throw ShapeError("cannot partition " + std::to_string(p.c()) +
                     " channels into " + std::to_string(s) + " equal groups");
  }
  if (cfgs.size() != 1 && cfgs.size() != s) {
    throw ShapeError("expected 1 or " + std::to_string(s) +
                     " head configs, got " + std::to_string(cfgs.size()));
  }
  if (kernel && kernel->channels() != p.c()) {
    throw ShapeError("LePE kernel must cover all " + std::to_string(p.c()) +
                     " channels");
  }
  const std::size_t width = p.c() / s;
  std::vector<DenseMatrix> parts;
  parts.reserve(s);
  for (std::size_t g = 0; g < s; ++g) {
    const auto& cfg = cfgs.size() == 1 ? cfgs[0] : cfgs[g];
    std::optional<DepthwiseKernel> group_kernel;
    if (kernel) group_kernel = kernel->slice(g * width, width);
    parts.push_back(elfatt_forward(slice_channels(p, g * width, width), cfg, mode,
                                   group_kernel, scope));
  }
  return hcat(parts);
}

}  // namespace elfatt
