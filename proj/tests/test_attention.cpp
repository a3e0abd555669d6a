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

#include <cmath>

#include "elfatt/attention.hpp"
#include "elfatt/bench.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/error.hpp"
#include "oracles.hpp"

using namespace elfatt;

namespace {

AttentionProblem seeded(std::uint64_t seed, std::size_t m, std::size_t c, double mag = 0.5) {
  return AttentionProblem(oracle::random_matrix(seed, m, c, -mag, mag),
                          oracle::random_matrix(seed + 1, m, c, -mag, mag),
                          oracle::random_matrix(seed + 2, m, c, -mag, mag));
}

}  // namespace

TEST(AttentionProblem, ValidatesShapesAndGrid) {
  EXPECT_THROW(AttentionProblem(DenseMatrix(4, 2), DenseMatrix(4, 3), DenseMatrix(4, 2)),
               ShapeError);
  EXPECT_THROW(AttentionProblem(DenseMatrix(4, 2), DenseMatrix(4, 2), DenseMatrix(4, 2),
                                Grid{3, 2}),
               ShapeError);
  EXPECT_NO_THROW(AttentionProblem(DenseMatrix(6, 2), DenseMatrix(6, 2), DenseMatrix(6, 2),
                                   Grid{3, 2}));
}

TEST(AttentionMode, ScaleValidation) {
  EXPECT_THROW(AttentionMode::normalized(0.0), ConfigError);
  EXPECT_THROW(AttentionMode::normalized(-1.0), ConfigError);
  EXPECT_THROW(AttentionMode::normalized(NAN), ConfigError);
  EXPECT_DOUBLE_EQ(AttentionMode::normalized().resolved_scale(16), 0.25);
  EXPECT_DOUBLE_EQ(AttentionMode::normalized(2.0).resolved_scale(16), 2.0);
}

TEST(Vanilla, ZeroScoresAverageValues) {
  const std::size_t m = 5, c = 3;
  const auto v = oracle::random_matrix(3, m, c);
  const AttentionProblem p(DenseMatrix(m, c), DenseMatrix(m, c), v);
  const auto out = vanilla_attention(p, AttentionMode::normalized(1.0));
  for (std::size_t j = 0; j < c; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < m; ++i) mean += v(i, j) / m;
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(out(i, j), mean, 1e-15);
  }
}

TEST(Vanilla, SingleTokenReturnsValues) {
  const auto p = seeded(9, 1, 4, 3.0);
  EXPECT_LE(oracle::rel_frob(p.v(), vanilla_attention(p, AttentionMode::normalized())), 1e-15);
}

TEST(Vanilla, MatchesPairwiseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = seeded(seed * 3, 6, 4);
    EXPECT_LE(oracle::rel_frob(oracle::pairwise_attention(p.q(), p.k(), p.v(), false, 1.0),
                               vanilla_attention(p, AttentionMode::raw_exp())),
              1e-12);
    EXPECT_LE(oracle::rel_frob(oracle::pairwise_attention(p.q(), p.k(), p.v(), true, 0.5),
                               vanilla_attention(p, AttentionMode::normalized())),
              1e-12);
  }
}

TEST(Vanilla, RawOverflowIsReported) {
  const auto p = seeded(1, 4, 4, 30.0);
  EXPECT_THROW(vanilla_attention(p, AttentionMode::raw_exp()), OverflowError);
  EXPECT_NO_THROW(vanilla_attention(p, AttentionMode::normalized()));
}

TEST(BlockMask, DivisibilityAndMaterialization) {
  EXPECT_THROW(BlockMask(10, 3), DivisibilityError);
  const auto z = BlockMask(6, 3).materialize();
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(z(i, j), i / 2 == j / 2 ? 1.0 : 0.0);
}

TEST(MaskedVanilla, FullMaskIsVanillaBitForBit) {
  const auto p = seeded(11, 12, 3);
  for (auto mode : {AttentionMode::raw_exp(), AttentionMode::normalized()}) {
    EXPECT_EQ(masked_vanilla_attention(p, BlockMask(12, 1), mode), vanilla_attention(p, mode));
  }
}

TEST(MaskedVanilla, SelfOnlyMaskReturnsValues) {
  const auto p = seeded(12, 8, 3);
  EXPECT_LE(oracle::rel_frob(p.v(),
                             masked_vanilla_attention(p, BlockMask(8, 8), AttentionMode::normalized())),
            1e-15);
}

TEST(MaskedVanilla, MatchesPerBlockOracle) {
  const auto p = seeded(13, 8, 3);
  auto same_block = [](std::size_t i, std::size_t j) { return i / 4 == j / 4; };
  EXPECT_LE(oracle::rel_frob(oracle::pairwise_attention(p.q(), p.k(), p.v(), false, 1.0, same_block),
                             masked_vanilla_attention(p, BlockMask(8, 2), AttentionMode::raw_exp())),
            1e-12);
  EXPECT_LE(oracle::rel_frob(
                oracle::pairwise_attention(p.q(), p.k(), p.v(), true, 1 / std::sqrt(3.0), same_block),
                masked_vanilla_attention(p, BlockMask(8, 2), AttentionMode::normalized())),
            1e-12);
  EXPECT_THROW(masked_vanilla_attention(p, BlockMask(4, 2), AttentionMode::raw_exp()), ShapeError);
}

TEST(Vanilla, PermutationEquivariant) {
  const auto p = seeded(14, 7, 3);
  const std::size_t perm[] = {3, 0, 6, 1, 5, 2, 4};
  auto permute = [&](const DenseMatrix& a) {
    DenseMatrix b(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) b(i, j) = a(perm[i], j);
    return b;
  };
  const AttentionProblem pp(permute(p.q()), permute(p.k()), permute(p.v()));
  for (auto mode : {AttentionMode::raw_exp(), AttentionMode::normalized()}) {
    EXPECT_LE(oracle::rel_frob(permute(vanilla_attention(p, mode)), vanilla_attention(pp, mode)),
              1e-13);
  }
}

TEST(Vanilla, NormalizedRowsAreConvexCombinations) {
  const auto p = seeded(15, 16, 4, 2.0);
  const auto out = vanilla_attention(p, AttentionMode::normalized());
  for (std::size_t j = 0; j < 4; ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < 16; ++i) lo = std::min(lo, p.v()(i, j)), hi = std::max(hi, p.v()(i, j));
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_GE(out(i, j), lo - 1e-12);
      EXPECT_LE(out(i, j), hi + 1e-12);
    }
  }
}

TEST(GenerateProblem, SeededAndBounded) {
  const auto a = generate_problem(32, 8, 5, 0.5);
  const auto b = generate_problem(32, 8, 5, 0.5);
  EXPECT_EQ(a.q(), b.q());
  EXPECT_EQ(a.v(), b.v());
  EXPECT_NE(a.q(), generate_problem(32, 8, 6, 0.5).q());
  EXPECT_LE(max_abs(a.q()), 0.5);
  EXPECT_THROW(generate_problem(4, 4, 0, 0.0), ConfigError);
}

TEST(GenerateProblem, HalfMagnitudeIsRawSafeAtDeskScale) {
  // |q.k| <= c * 0.25 = 16 for c = 64, far below the exp overflow point.
  const auto p = generate_problem(512, 64, 1, 0.5);
  const auto s = matmul_transposed(p.q(), p.k());
  EXPECT_LE(max_abs(s), 64 * 0.25);
  EXPECT_NO_THROW(vanilla_attention(p, AttentionMode::raw_exp()));
}
