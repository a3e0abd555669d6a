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

#include <gtest/gtest.h>

#include "elfatt/error.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/kernel_approx.hpp"
#include "oracles.hpp"

using namespace elfatt;

namespace {

AttentionProblem seeded(std::uint64_t seed, std::size_t m, std::size_t c, double mag = 0.5,
                        std::optional<Grid> grid = std::nullopt) {
  return AttentionProblem(oracle::random_matrix(seed, m, c, -mag, mag),
                          oracle::random_matrix(seed + 1, m, c, -mag, mag),
                          oracle::random_matrix(seed + 2, m, c, -mag, mag), grid);
}

const AttentionMode kModes[] = {AttentionMode::raw_exp(), AttentionMode::normalized()};

}  // namespace

TEST(HeadSplitConfig, DefaultsAndValidation) {
  const auto d = HeadSplitConfig::defaults(256, 7);
  EXPECT_EQ(d.c1, 3u);
  EXPECT_EQ(d.c2, 4u);
  EXPECT_EQ(d.b, 4u);
  EXPECT_THROW(HeadSplitConfig::defaults(100, 8), DivisibilityError);
  EXPECT_THROW((HeadSplitConfig{2, 2, 2}).validate(8, 5), ShapeError);
  EXPECT_THROW((HeadSplitConfig{2, 2, 3}).validate(8, 4), DivisibilityError);
  EXPECT_THROW((HeadSplitConfig{0, 0, 1}).validate(8, 0), ShapeError);
  EXPECT_NO_THROW((HeadSplitConfig{4, 0, 3}).validate(8, 4));
}

TEST(ProjectQkv, IdentityZeroAndOracle) {
  const auto h = oracle::random_matrix(1, 6, 3);
  const auto id = DenseMatrix::identity(3);
  const auto p = project_qkv(h, QkvProjection(id, id, id));
  EXPECT_EQ(p.q(), h);
  EXPECT_EQ(p.v(), h);
  const auto zv = project_qkv(h, QkvProjection(id, id, DenseMatrix(3, 3)));
  EXPECT_EQ(max_abs(vanilla_attention(zv, AttentionMode::normalized())), 0.0);
  const auto w = oracle::random_matrix(2, 3, 5);
  const auto pw = project_qkv(h, QkvProjection(w, w, w));
  const auto want = oracle::matmul(h, w);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(pw.k()(i, j), want[i][j], 1e-15);
  EXPECT_THROW(project_qkv(h, QkvProjection(DenseMatrix(4, 2), DenseMatrix(4, 2), DenseMatrix(4, 2))),
               ShapeError);
}

TEST(SplitChannels, EdgesAndRoundTrip) {
  const auto p = seeded(3, 8, 5);
  const auto none = split_channels(p, {0, 5, 2});
  EXPECT_FALSE(none.barred);
  EXPECT_EQ(none.tilded->q(), p.q());
  const auto all = split_channels(p, {5, 0, 1});
  EXPECT_FALSE(all.tilded);
  const auto mid = split_channels(p, {2, 3, 2});
  EXPECT_EQ(mid.barred->c(), 2u);
  const auto back = concat_channels(mid);
  EXPECT_EQ(back.q(), p.q());
  EXPECT_EQ(back.k(), p.k());
  EXPECT_EQ(back.v(), p.v());
  EXPECT_THROW(split_channels(p, {2, 2, 2}), ShapeError);
}

TEST(Blockify, EdgesInverseAndErrors) {
  const auto a = oracle::random_matrix(4, 12, 3);
  EXPECT_EQ(blockify(a, 1).front(), a);
  const auto rows = blockify(a, 12);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[7], row_slice(a, 7, 1));
  for (std::size_t b : {1u, 2u, 3u, 4u, 6u, 12u}) EXPECT_EQ(unblockify(blockify(a, b)), a);
  EXPECT_THROW(blockify(a, 5), DivisibilityError);
  const DenseMatrix ragged[] = {DenseMatrix(2, 3), DenseMatrix(3, 3)};
  EXPECT_THROW(unblockify(ragged), ShapeError);
}

TEST(BlockSparseHead, EqualsMaskedAttention) {
  const auto p = seeded(5, 64, 8);
  for (auto mode : kModes) {
    EXPECT_LE(oracle::rel_frob(masked_vanilla_attention(p, BlockMask(64, 4), mode),
                               block_sparse_head(p, 4, mode)),
              1e-12);
    EXPECT_LE(oracle::rel_frob(vanilla_attention(p, mode), block_sparse_head(p, 1, mode)), 1e-12);
  }
  EXPECT_LE(oracle::rel_frob(p.v(), block_sparse_head(p, 64, AttentionMode::normalized())), 1e-15);
  EXPECT_THROW(block_sparse_head(p, 5, AttentionMode::raw_exp()), DivisibilityError);
}

TEST(GlobalLinearHead, PrefactorAndOracle) {
  const auto p = seeded(6, 10, 3);
  const auto raw = global_linear_head(p, AttentionMode::raw_exp());
  EXPECT_LE(oracle::rel_frob(scaled(effatt_attention(p, AttentionMode::raw_exp()), 3.0), raw), 1e-14);
  const auto want = oracle::matmul(elementwise_exp(p.q()),
                                   matmul(transpose(elementwise_exp(p.k())), p.v()));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(raw(i, j), want[i][j], 1e-12 * std::abs(want[i][j]) + 1e-14);

  const AttentionProblem z(DenseMatrix(4, 2), DenseMatrix(4, 2), oracle::random_matrix(1, 4, 2));
  const auto out = global_linear_head(z, AttentionMode::normalized());
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 4; ++i) mean += z.v()(i, j) / 4;
    EXPECT_NEAR(out(2, j), mean, 1e-15);
  }
}

TEST(Lepe, DeltaZeroAndDirectOracle) {
  const auto v = oracle::random_matrix(7, 16, 2);
  const Grid g{4, 4};
  EXPECT_EQ(lepe(v, g, DepthwiseKernel::delta(2)), v);
  EXPECT_EQ(max_abs(lepe(v, g, DepthwiseKernel::zeros(2))), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t h = 2 + seed % 4, w = 1 + seed % 5;
    const auto vv = oracle::random_matrix(seed, h * w, 3);
    const auto weights = oracle::random_matrix(seed + 50, 3, 9);
    const auto got = lepe(vv, Grid{h, w}, DepthwiseKernel::from_matrix(weights));
    const auto want = oracle::conv3x3(vv, h, w, weights);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-12);
  }
  EXPECT_THROW(lepe(v, Grid{3, 5}, DepthwiseKernel::delta(2)), ShapeError);
  EXPECT_THROW(lepe(v, g, DepthwiseKernel::delta(3)), ShapeError);
}

TEST(ElfattForward, DegenerateSplits) {
  const auto p = seeded(8, 16, 4);
  for (auto mode : kModes) {
    EXPECT_LE(oracle::rel_frob(block_sparse_head(p, 4, mode), elfatt_forward(p, {0, 4, 4}, mode)),
              1e-12);
    EXPECT_LE(oracle::rel_frob(global_linear_head(p, mode), elfatt_forward(p, {4, 0, 1}, mode)),
              1e-12);
  }
}

TEST(ElfattForward, ComponentsAtSingleBlock) {
  const auto p = seeded(9, 12, 6);
  const auto out = elfatt_forward(p, {2, 4, 1}, AttentionMode::raw_exp());
  const auto s = split_channels(p, {2, 4, 1});
  const auto left = oracle::matmul(elementwise_exp(s.barred->q()),
                                   matmul(transpose(elementwise_exp(s.barred->k())), s.barred->v()));
  const auto right = oracle::pairwise_attention(s.tilded->q(), s.tilded->k(), s.tilded->v(), false, 1.0);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(i, j), left[i][j], 1e-12 * std::abs(left[i][j]));
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(out(i, 2 + j), right(i, j), 1e-12 * std::abs(right(i, j)) + 1e-15);
  }
}

TEST(ElfattForward, HeadsAreIndependent) {
  const auto p = seeded(10, 16, 6);
  const HeadSplitConfig cfg{3, 3, 4};
  const auto base = elfatt_forward(p, cfg, AttentionMode::normalized());
  DenseMatrix q = p.q();
  for (std::size_t i = 0; i < 16; ++i) q(i, 4) += 0.25;
  const auto moved = elfatt_forward(AttentionProblem(q, p.k(), p.v()), cfg, AttentionMode::normalized());
  EXPECT_EQ(column_slice(moved, 0, 3), column_slice(base, 0, 3));
  EXPECT_NE(column_slice(moved, 3, 3), column_slice(base, 3, 3));
}

TEST(ElfattForward, LepeScopes) {
  const Grid g{4, 4};
  const auto p = seeded(11, 16, 4, 0.5, g);
  const HeadSplitConfig cfg{2, 2, 4};
  const auto mode = AttentionMode::normalized();
  const auto plain = elfatt_forward(p, cfg, mode);
  const auto weights = oracle::random_matrix(3, 4, 9);
  const auto kernel = DepthwiseKernel::from_matrix(weights);

  // Global head: L over the whole grid. Sparse head, per block: each block of
  // 4 tokens is a 1x4 strip.
  const auto per_block = elfatt_forward(p, cfg, mode, kernel, LepeScope::PerBlock);
  const auto s = split_channels(p, cfg);
  const auto lb = oracle::conv3x3(s.barred->v(), 4, 4, row_slice(weights, 0, 2));
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(per_block(i, j) - plain(i, j), lb(i, j), 1e-12);
  const auto tw = row_slice(weights, 2, 2);
  for (std::size_t blk = 0; blk < 4; ++blk) {
    const auto strip = oracle::conv3x3(row_slice(s.tilded->v(), blk * 4, 4), 1, 4, tw);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t j = 0; j < 2; ++j)
        EXPECT_NEAR(per_block(blk * 4 + r, 2 + j) - plain(blk * 4 + r, 2 + j), strip(r, j), 1e-12);
  }

  const auto full = elfatt_forward(p, cfg, mode, kernel, LepeScope::FullGrid);
  const auto lt = oracle::conv3x3(s.tilded->v(), 4, 4, tw);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(full(i, 2 + j) - plain(i, 2 + j), lt(i, j), 1e-12);

  const auto no_grid = seeded(11, 16, 4);
  EXPECT_THROW(elfatt_forward(no_grid, cfg, mode, kernel), ConfigError);
}

TEST(DoubleHeadReference, PerHalfVanilla) {
  const auto p = seeded(12, 8, 4);
  for (auto mode : kModes) {
    const auto ref = double_head_reference(p, {1, 3, 2}, mode);
    const auto s = split_channels(p, {1, 3, 2});
    EXPECT_EQ(column_slice(ref, 0, 1), vanilla_attention(*s.barred, mode));
    EXPECT_EQ(column_slice(ref, 1, 3), vanilla_attention(*s.tilded, mode));
    EXPECT_EQ(double_head_reference(p, {4, 0, 1}, mode), vanilla_attention(p, mode));
  }
  const auto one = seeded(13, 1, 4);
  EXPECT_LE(oracle::rel_frob(one.v(), double_head_reference(one, {2, 2, 1}, AttentionMode::normalized())),
            1e-15);
}

TEST(MultiHead, GroupsAreIndependentCalls) {
  const auto p = seeded(14, 16, 8);
  const HeadSplitConfig cfg{2, 2, 4};
  const auto mode = AttentionMode::normalized();
  const HeadSplitConfig single[] = {{4, 4, 4}};
  EXPECT_EQ(multi_head_elfatt(p, 1, single, mode), elfatt_forward(p, {4, 4, 4}, mode));
  const HeadSplitConfig shared[] = {cfg};
  const auto two = multi_head_elfatt(p, 2, shared, mode);
  const auto s0 = split_channels(p, {4, 4, 1});
  EXPECT_EQ(column_slice(two, 0, 4), elfatt_forward(*s0.barred, cfg, mode));
  EXPECT_EQ(column_slice(two, 4, 4), elfatt_forward(*s0.tilded, cfg, mode));

  // Swapping the two channel groups swaps the output groups.
  const auto swap = [](const DenseMatrix& a) { return hcat(column_slice(a, 4, 4), column_slice(a, 0, 4)); };
  const AttentionProblem ps(swap(p.q()), swap(p.k()), swap(p.v()));
  EXPECT_EQ(multi_head_elfatt(ps, 2, shared, mode), swap(two));
  EXPECT_THROW(multi_head_elfatt(p, 3, shared, mode), ShapeError);
}
