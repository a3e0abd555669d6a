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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elfatt/attention.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/matrix.hpp"

namespace elfatt {

// Per-pair sandwich for the linearization ratio
//   ratio = exp(q) exp(k)^T / exp(q k^T),
// with t_i = exp(q k^T + 0.5 - (q_i + k_i)), D = max_i t_i, d = min_i t_i:
//   c1 / (D e^-0.5) <= ratio <= c1 / (d e^-0.5).
struct Lemma1Bounds {
  double lower = 0.0;
  double upper = 0.0;
  double ratio = 0.0;
  double big_d = 0.0;
  double small_d = 0.0;
};

Lemma1Bounds lemma1_bounds(std::span<const double> qbar,
                           std::span<const double> kbar);

// Global extrema of t over every query/key pair and channel.
struct BoundStatistics {
  double big_m = 0.0;    // maximum
  double small_m = 0.0;  // minimum
  std::size_t c1 = 0;

  // c1 / (big_m e^-0.5): lower end of every pairwise ratio.
  double ratio_lower() const;
  // c1 / (small_m e^-0.5): upper end of every pairwise ratio.
  double ratio_upper() const;
};

// Brute force, O(m^2 c1). Refuses m above kMaxStatisticsLength.
inline constexpr std::size_t kMaxStatisticsLength = 512;
BoundStatistics corollary1_stats(const DenseMatrix& qbar, const DenseMatrix& kbar);

// Per-pair D and d for rows i1 of qbar and i2 of kbar.
Lemma1Bounds pair_statistics(const DenseMatrix& qbar, const DenseMatrix& kbar,
                             std::size_t i1, std::size_t i2);

// Which coefficient multiplies the second term: SmallM when
// |ratio_upper - 1| >= |ratio_lower - 1|, BigM otherwise.
enum class TheoremBranch { SmallM, BigM };
const char* to_string(TheoremBranch branch) noexcept;

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::string name;
  double measured_error = 0.0;
  double bound_value = 0.0;
  std::optional<TheoremBranch> branch;
  NormKind norm_kind = NormKind::Frobenius;
  // Summands of bound_value.
  std::vector<BoundTerm> component_terms;
  // Values reported for comparison only; not part of the bound.
  std::vector<BoundTerm> diagnostics;
  // Slack for the holds() check: 1e-9 |bound| plus, for the spectral norm,
  // the power-iteration gaps propagated through the bound's norm products.
  double tolerance = 0.0;
  std::string note;

  bool holds() const noexcept {
    return measured_error <= bound_value + tolerance;
  }
  double component_sum() const noexcept;
  const BoundTerm* diagnostic(const std::string& name) const noexcept;
  // One "name=value" line per field and term.
  std::string to_key_value() const;
};

// Theorem: bound on |exp(Qb) exp(Kb)^T - exp(Qb Kb^T) (.) exp(Qt Kt^T)|.
BoundReport theorem1_bound(const DenseMatrix& qbar, const DenseMatrix& kbar,
                           const DenseMatrix& qtilde, const DenseMatrix& ktilde,
                           NormKind kind);

// ELFATT against single-head exp(QK^T)V. Requires c1 >= 1 and c2 >= 1.
BoundReport total_bound_single_head(const AttentionProblem& p,
                                    const HeadSplitConfig& cfg, NormKind kind);

// ELFATT against [exp(Qb Kb^T) Vb, exp(Qt Kt^T) Vt].
BoundReport total_bound_double_head(const AttentionProblem& p,
                                    const HeadSplitConfig& cfg, NormKind kind);

// Attention-matrix comparators against [exp(Qb Kb^T), exp(Qt Kt^T)]: the
// bound is the sum of the per-half discrepancies.
BoundReport effatt_decomposition_bound(const AttentionProblem& p,
                                       const HeadSplitConfig& cfg, NormKind kind);
BoundReport elfatt_decomposition_bound(const AttentionProblem& p,
                                       const HeadSplitConfig& cfg, NormKind kind);
// Uses block-diagonal Z for both halves in place of cross-shaped windows.
BoundReport local_decomposition_bound(const AttentionProblem& p,
                                      const HeadSplitConfig& cfg, NormKind kind);

// |A - A'| / |A|; DegeneracyError when |A| is zero.
double relative_error(const DenseMatrix& exact, const DenseMatrix& approx,
                      NormKind kind);

struct FlopsEstimate {
  std::uint64_t global_head = 0;
  std::uint64_t sparse_head = 0;
  std::uint64_t vanilla = 0;
};

// Multiply-accumulate counts: global m c1^2 (m^2 c1 when m <= c1), sparse
// (m^2 / b) c2, vanilla m^2 c.
FlopsEstimate flops_estimate(std::size_t m, const HeadSplitConfig& cfg);

}  // namespace elfatt
