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

#include <algorithm>
#include <cmath>

#include "elfatt/error.hpp"
#include "elfatt/kernel_approx.hpp"
#include "oracles.hpp"

using namespace elfatt;

namespace {

AttentionProblem seeded(std::uint64_t seed, std::size_t m, std::size_t c, double mag = 0.5) {
  return AttentionProblem(oracle::random_matrix(seed, m, c, -mag, mag),
                          oracle::random_matrix(seed + 1, m, c, -mag, mag),
                          oracle::random_matrix(seed + 2, m, c, -mag, mag));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(RandomFeatureMap, DefaultCountAndDeterminism) {
  EXPECT_EQ(RandomFeatureMap::default_feature_count(1), 1u);
  EXPECT_EQ(RandomFeatureMap::default_feature_count(2), 2u);   // ceil(1.386)
  EXPECT_EQ(RandomFeatureMap::default_feature_count(64), 267u);  // ceil(266.17)
  const auto a = RandomFeatureMap::sample(4, 10, 77);
  const auto b = RandomFeatureMap::sample(4, 10, 77);
  EXPECT_EQ(a.omegas(), b.omegas());
  EXPECT_NE(a.omegas(), RandomFeatureMap::sample(4, 10, 78).omegas());
  EXPECT_THROW(RandomFeatureMap::sample(4, 0, 1), ConfigError);
}

TEST(PerformerScore, ZeroVectorsAreExact) {
  const std::vector<double> zero(3, 0.0);
  for (std::size_t r : {1u, 7u, 100u}) {
    EXPECT_EQ(performer_score(zero, zero, RandomFeatureMap::sample(3, r, r)), 1.0);
  }
}

TEST(PerformerScore, UnbiasedAtLargeFeatureCount) {
  const std::vector<double> x{0.3, -0.2, 0.4}, y{-0.1, 0.5, 0.2};
  const double exact = std::exp(dot(x, y));
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    mean += performer_score(x, y, RandomFeatureMap::sample(3, 100000, seed)) / 20;
  }
  EXPECT_LE(std::abs(mean - exact) / exact, 0.05);
}

TEST(PerformerScore, ExFactorCancelsAfterNormalization) {
  const auto keys = oracle::random_matrix(5, 8, 4);
  const auto x = oracle::random_matrix(6, 1, 4);
  const auto fm = RandomFeatureMap::sample(4, 50, 3);
  std::vector<double> on, off;
  for (std::size_t j = 0; j < 8; ++j) {
    on.push_back(performer_score(x.row(0), keys.row(j), fm.with_flags(true, true)));
    off.push_back(performer_score(x.row(0), keys.row(j), fm.with_flags(false, true)));
  }
  double son = 0, soff = 0;
  for (std::size_t j = 0; j < 8; ++j) son += on[j], soff += off[j];
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(on[j] / son, off[j] / soff, 1e-12);
}

TEST(PerformerAttention, SingleTokenReturnsValues) {
  const auto p = seeded(1, 1, 4);
  const auto fm = RandomFeatureMap::sample(4, 16, 2);
  EXPECT_LE(oracle::rel_frob(p.v(), performer_attention(p, fm, AttentionMode::normalized())),
            1e-14);
}

TEST(PerformerAttention, AssociationOrderIrrelevant) {
  for (std::size_t m : {4u, 16u, 32u}) {
    const auto p = seeded(m, m, 4);
    const auto fm = RandomFeatureMap::sample(4, 20, m);
    for (auto mode : {AttentionMode::raw_exp(), AttentionMode::normalized()}) {
      const auto left = matmul(performer_attention_weights(p, fm, mode), p.v());
      EXPECT_LE(oracle::rel_frob(left, performer_attention(p, fm, mode)), 1e-10);
    }
  }
}

TEST(PerformerAttention, ApproachesVanillaWithManyFeatures) {
  std::vector<double> errs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = seeded(seed * 5, 16, 4, 1.0);
    const auto fm = RandomFeatureMap::sample(4, 10000, seed);
    errs.push_back(oracle::rel_frob(vanilla_attention(p, AttentionMode::normalized()),
                                    performer_attention(p, fm, AttentionMode::normalized())));
  }
  std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
  EXPECT_LE(errs[5], 0.10);
}

TEST(PerformerAttention, NormalizedRowsAreConvexCombinations) {
  const auto p = seeded(3, 12, 4);
  const auto out = performer_attention(p, RandomFeatureMap::sample(4, 30, 9),
                                       AttentionMode::normalized());
  for (std::size_t j = 0; j < 4; ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < 12; ++i) lo = std::min(lo, p.v()(i, j)), hi = std::max(hi, p.v()(i, j));
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_GE(out(i, j), lo - 1e-12);
      EXPECT_LE(out(i, j), hi + 1e-12);
    }
  }
}

TEST(PerformerAttention, NeverFormsQuadraticBuffer) {
  const std::size_t m = 200, c = 4;
  const auto p = seeded(4, m, c);
  const auto fm = RandomFeatureMap::sample(c, 16, 1);
  AllocationProbe probe;
  (void)performer_attention(p, fm, AttentionMode::normalized());
  EXPECT_LE(probe.peak_entries(), m * std::max<std::size_t>(c, 16));
}

TEST(Effatt, MatchesOneHotPerformer) {
  const std::size_t c = 4;
  const auto p = seeded(8, 10, c);
  // Performer with the c basis vectors, flags off, r = c: phi(Q) phi(K)^T
  // = (1/c) exp(Q) exp(K)^T, the same prefactor as EFFATT.
  const auto fm = RandomFeatureMap::from_omegas(DenseMatrix::identity(c), false, false);
  for (auto mode : {AttentionMode::raw_exp(), AttentionMode::normalized(1.0)}) {
    EXPECT_LE(oracle::rel_frob(performer_attention(p, fm, mode), effatt_attention(p, mode)),
              1e-13);
  }
}

TEST(Effatt, ZeroScoresAverageValues) {
  const auto v = oracle::random_matrix(3, 6, 2);
  const AttentionProblem p(DenseMatrix(6, 2), DenseMatrix(6, 2), v);
  const auto out = effatt_attention(p, AttentionMode::normalized());
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 6; ++i) mean += v(i, j) / 6;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out(i, j), mean, 1e-15);
  }
}

TEST(Effatt, SingleChannelIsExact) {
  // c = 1: exp(q) exp(k) = exp(q + k) while exp(q k) differs; the literal
  // form matches the two-step oracle.
  const auto p = seeded(2, 5, 1);
  const auto want = oracle::matmul(elementwise_exp(p.q()),
                                   matmul(transpose(elementwise_exp(p.k())), p.v()));
  const auto got = effatt_attention(p, AttentionMode::raw_exp());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got(i, 0), want[i][0], 1e-14);
}

TEST(Effatt, LinearFootprint) {
  const std::size_t m = 300, c = 8;
  const auto p = seeded(5, m, c);
  AllocationProbe probe;
  (void)effatt_attention(p, AttentionMode::raw_exp());
  EXPECT_LE(probe.peak_entries(), std::max(m, c) * c);
}
