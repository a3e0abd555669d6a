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
#include <cstdint>
#include <span>

#include "elfatt/attention.hpp"
#include "elfatt/matrix.hpp"

namespace elfatt {

// Gaussian projection directions for the positive random-feature estimator
//   exp(x y^T) = E_w[ exp(w x^T) exp(w y^T) e(x) e(y) ],  e(x) = exp(-|x|^2/2).
// include_ex / include_ey switch the query / key correction factors.
class RandomFeatureMap {
 public:
  // Draws r rows i.i.d. from N(0, I_c). Same seed, same omegas.
  static RandomFeatureMap sample(std::size_t c, std::size_t r,
                                 std::uint64_t seed, bool include_ex = true,
                                 bool include_ey = true);
  // Uses caller-provided directions (e.g. one-hot rows); seed is recorded as 0.
  static RandomFeatureMap from_omegas(DenseMatrix omegas, bool include_ex,
                                      bool include_ey);
  // ceil(c ln c), at least 1.
  static std::size_t default_feature_count(std::size_t c);

  const DenseMatrix& omegas() const noexcept { return omegas_; }
  std::size_t features() const noexcept { return omegas_.rows(); }
  std::size_t dim() const noexcept { return omegas_.cols(); }
  std::uint64_t seed() const noexcept { return seed_; }
  bool include_ex() const noexcept { return include_ex_; }
  bool include_ey() const noexcept { return include_ey_; }

  RandomFeatureMap with_flags(bool include_ex, bool include_ey) const;

 private:
  RandomFeatureMap(DenseMatrix omegas, std::uint64_t seed, bool ex, bool ey)
      : omegas_(std::move(omegas)), seed_(seed), include_ex_(ex), include_ey_(ey) {}
  DenseMatrix omegas_;
  std::uint64_t seed_;
  bool include_ex_;
  bool include_ey_;
};

// Monte-Carlo estimate (1/r) sum_w exp(w x^T) exp(w y^T) [e(x)] [e(y)].
double performer_score(std::span<const double> x, std::span<const double> y,
                       const RandomFeatureMap& fm);

enum class FeatureSide { Query, Key };

// Row i is exp(w x_i^T) / sqrt(r) over all w, times e(x_i) when the flag for
// that side is set. Shape rows(x) x r.
DenseMatrix performer_features(const DenseMatrix& x, const RandomFeatureMap& fm,
                               FeatureSide side);

// phi(Q) (phi(K)^T V), never forming an m x m matrix. Normalized mode folds
// sqrt(scale) into Q and K and divides row i by phi(q_i) . (phi(K)^T 1).
DenseMatrix performer_attention(const AttentionProblem& p,
                                const RandomFeatureMap& fm, AttentionMode mode);

// Explicit m x m weights phi(Q) phi(K)^T, row-normalized in Normalized mode.
// Quadratic; meant for inspection and tests.
DenseMatrix performer_attention_weights(const AttentionProblem& p,
                                        const RandomFeatureMap& fm,
                                        AttentionMode mode);

// Efficient attention: (1/c) exp(Q) (exp(K)^T V), right-associated.
DenseMatrix effatt_attention(const AttentionProblem& p, AttentionMode mode);

// Normalizers below this are treated as degenerate.
inline constexpr double kDegenerateDenominator = 1e-300;

}  // namespace elfatt
