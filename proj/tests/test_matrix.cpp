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
#include <numeric>

#include "elfatt/error.hpp"
#include "elfatt/matrix.hpp"
#include "elfatt/parallel.hpp"
#include "oracles.hpp"

using namespace elfatt;

TEST(DenseMatrix, RejectsBadShapesAndNonFinite) {
  EXPECT_THROW(DenseMatrix(0, 3), ShapeError);
  EXPECT_THROW(DenseMatrix(2, 2, {1, 2, 3}), ShapeError);
  EXPECT_THROW(DenseMatrix(1, 2, {1, NAN}), OverflowError);
  EXPECT_THROW(DenseMatrix(1, 1, {INFINITY}), OverflowError);
  const DenseMatrix z(2, 3);
  EXPECT_EQ(z.size(), 6u);
  EXPECT_EQ(max_abs(z), 0.0);
}

TEST(Matmul, IdentityAndHandExample) {
  const auto m = oracle::random_matrix(1, 3, 5);
  EXPECT_EQ(matmul(DenseMatrix::identity(3), m), m);
  const auto r = matmul(DenseMatrix::from_rows({{1, 2}, {3, 4}}),
                        DenseMatrix::from_rows({{1}, {1}}));
  EXPECT_EQ(r, DenseMatrix::from_rows({{3}, {7}}));
}

TEST(Matmul, MatchesTripleLoop) {
  for (std::size_t rows : {1u, 5u, 17u, 32u}) {
    for (std::size_t inner : {1u, 4u, 31u}) {
      const auto a = oracle::random_matrix(rows * 7 + inner, rows, inner);
      const auto b = oracle::random_matrix(rows + inner * 3, inner, 3);
      const auto want = oracle::matmul(a, b);
      const auto got = matmul(a, b);
      long double num = 0;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          const long double d = want[i][j] - got(i, j);
          num += d * d;
        }
      EXPECT_LE(std::sqrt(static_cast<double>(num)), 1e-12 * oracle::frob(want));
    }
  }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(DenseMatrix(2, 3), DenseMatrix(4, 2));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2x3"), std::string::npos) << what;
    EXPECT_NE(what.find("4x2"), std::string::npos) << what;
  }
}

TEST(Matmul, TransposedVariantAgrees) {
  const auto a = oracle::random_matrix(3, 6, 4);
  const auto b = oracle::random_matrix(4, 5, 4);
  EXPECT_LE(oracle::rel_frob(matmul(a, transpose(b)), matmul_transposed(a, b)), 1e-15);
}

TEST(Matmul, ThreadCountDoesNotChangeResult) {
  const auto a = oracle::random_matrix(5, 40, 30);
  const auto b = oracle::random_matrix(6, 30, 20);
  set_num_threads(1);
  const auto one = matmul(a, b);
  set_num_threads(4);
  const auto four = matmul(a, b);
  set_num_threads(1);
  EXPECT_EQ(one, four);
}

TEST(ElementwiseExp, BasicsAndOverflow) {
  EXPECT_EQ(elementwise_exp(DenseMatrix(2, 2)), DenseMatrix::ones(2, 2));
  EXPECT_NEAR(elementwise_exp(DenseMatrix::from_rows({{std::log(2.0)}}))(0, 0), 2.0, 1e-15);
  EXPECT_NO_THROW(elementwise_exp(DenseMatrix::from_rows({{709.0}})));
  try {
    elementwise_exp(DenseMatrix::from_rows({{1.0, 710.0}}));
    FAIL();
  } catch (const OverflowError& e) {
    EXPECT_NE(std::string(e.what()).find("710"), std::string::npos) << e.what();
  }
}

TEST(Hadamard, IdentitiesAndOracle) {
  const auto a = oracle::random_matrix(8, 4, 4);
  EXPECT_EQ(hadamard(a, DenseMatrix::ones(4, 4)), a);
  EXPECT_EQ(max_abs(hadamard(a, DenseMatrix(4, 4))), 0.0);
  const auto b = oracle::random_matrix(9, 4, 4);
  const auto h = hadamard(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(h(i, j), a(i, j) * b(i, j));
  EXPECT_THROW(hadamard(a, DenseMatrix(4, 3)), ShapeError);
}

TEST(Norm, IdentityAndDiagonal) {
  for (std::size_t n : {1u, 4u, 9u}) {
    EXPECT_NEAR(norm(DenseMatrix::identity(n), NormKind::Spectral), 1.0, 1e-12);
    EXPECT_NEAR(norm(DenseMatrix::identity(n), NormKind::Frobenius), std::sqrt(double(n)), 1e-12);
  }
  const std::vector<double> d{3, 4};
  EXPECT_NEAR(norm(DenseMatrix::diagonal(d), NormKind::Spectral), 4.0, 1e-9);
  EXPECT_NEAR(norm(DenseMatrix::diagonal(d), NormKind::Frobenius), 5.0, 1e-15);
}

TEST(Norm, SpectralMatchesJacobi) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = oracle::random_matrix(100 + seed, 6, 6);
    const double want = oracle::spectral(a);
    EXPECT_NEAR(spectral_norm(a).value, want, 1e-8 * want) << "seed " << seed;
  }
}

TEST(Norm, NearlyTiedSingularValuesStillConverge) {
  // Two decoupled blocks whose top singular values differ by ~1e-7.
  DenseMatrix a(4, 4);
  a(0, 1) = 1.0;
  a(2, 3) = 1.0 + 1e-7;
  a(1, 0) = 0.3;
  const auto est = spectral_norm(a);
  EXPECT_NEAR(est.value, oracle::spectral(a), 1e-9);
}

TEST(Norm, ConvergenceErrorCarriesGap) {
  DenseMatrix a(300, 300);
  for (std::size_t i = 0; i < 300; ++i) a(i, i) = 1.0 + 1e-6 * double(i % 2);
  SpectralNormOptions opts;
  opts.max_iterations = 2;
  opts.tolerance = 1e-300;
  try {
    spectral_norm(a, opts);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GE(e.last_gap(), 0.0);
  }
}

TEST(Norm, SubmultiplicativeAndOrdered) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = oracle::random_matrix(seed, 5, 4);
    const auto b = oracle::random_matrix(seed + 1000, 4, 6);
    const auto ab = matmul(a, b);
    EXPECT_LE(frobenius_norm(ab), frobenius_norm(a) * frobenius_norm(b) * (1 + 1e-9));
    const auto sa = spectral_norm(a), sb = spectral_norm(b);
    EXPECT_LE(spectral_norm(ab).value,
              sa.value * sb.value * (1 + 1e-9) * (1 + sa.gap) * (1 + sb.gap));
    EXPECT_LE(sa.value, frobenius_norm(a) * (1 + 1e-12));
  }
}

TEST(Norm, FrobeniusSurvivesHugeEntries) {
  const auto a = DenseMatrix::from_rows({{1e200, 1e200}});
  EXPECT_NEAR(frobenius_norm(a) / 1e200, std::sqrt(2.0), 1e-15);
}

TEST(NormKind, ParsesAliases) {
  EXPECT_EQ(parse_norm_kind("spectral"), NormKind::Spectral);
  EXPECT_EQ(parse_norm_kind("2"), NormKind::Spectral);
  EXPECT_EQ(parse_norm_kind("frobenius"), NormKind::Frobenius);
  EXPECT_EQ(parse_norm_kind("F"), NormKind::Frobenius);
  EXPECT_THROW(parse_norm_kind("nuclear"), ConfigError);
}

TEST(RowSoftmax, HandExamplesAndInvariants) {
  const auto uniform = row_softmax(DenseMatrix::from_rows({{5, 5, 5, 5}}), 2.0);
  for (double v : uniform.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  const auto hand = row_softmax(DenseMatrix::from_rows({{0, std::log(3.0)}}), 1.0);
  EXPECT_NEAR(hand(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(hand(0, 1), 0.75, 1e-15);

  auto a = oracle::random_matrix(4, 8, 8, -20, 20);
  const auto s = row_softmax(a, 1.0);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(std::accumulate(s.row(i).begin(), s.row(i).end(), 0.0), 1.0, 1e-12);
  }
  for (std::size_t j = 0; j < 8; ++j) a(3, j) += 100.0;
  EXPECT_LE(max_abs(subtract(s, row_softmax(a, 1.0))), 1e-12);
}

TEST(Concat, HcatVcatSlicesRoundTrip) {
  const auto a = oracle::random_matrix(1, 4, 6);
  const auto left = column_slice(a, 0, 2), right = column_slice(a, 2, 4);
  EXPECT_EQ(hcat(left, right), a);
  const DenseMatrix rows[] = {row_slice(a, 0, 1), row_slice(a, 1, 3)};
  EXPECT_EQ(vcat(rows), a);
  EXPECT_THROW(column_slice(a, 5, 2), ShapeError);
  EXPECT_THROW(hcat(a, DenseMatrix(3, 1)), ShapeError);
}

TEST(AllocationProbe, TracksPeakAndNests) {
  AllocationProbe outer;
  DenseMatrix a(10, 10);
  {
    AllocationProbe inner;
    DenseMatrix b(3, 3);
    EXPECT_EQ(inner.peak_entries(), 9u);
  }
  EXPECT_EQ(outer.peak_entries(), 100u);
}
