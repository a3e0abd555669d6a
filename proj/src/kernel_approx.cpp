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

#include "elfatt/kernel_approx.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "elfatt/error.hpp"

namespace elfatt {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double half_sq_norm(std::span<const double> a) { return 0.5 * dot(a, a); }

std::vector<double> column_sums(const DenseMatrix& a) {
  std::vector<double> sums(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) sums[j] += r[j];
  }
  return sums;
}

// Divides row i of out by denom_i = factor * (lhs_i . key_sums).
void normalize_rows(DenseMatrix& out, const DenseMatrix& lhs,
                    const std::vector<double>& key_sums, double factor) {
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double denom = factor * dot(lhs.row(i), key_sums);
    if (!(denom >= kDegenerateDenominator)) {
      throw DegeneracyError("normalizer of row " + std::to_string(i) +
                            " is below 1e-300");
    }
    for (double& v : out.row(i)) v /= denom;
  }
}

struct ScaledQK {
  DenseMatrix q, k;
};

// Normalized mode approximates exp(scale q k^T); fold sqrt(scale) into both.
ScaledQK prepare_qk(const AttentionProblem& p, AttentionMode mode) {
  if (mode.is_raw()) return {p.q(), p.k()};
  const double root = std::sqrt(mode.resolved_scale(p.c()));
  return {scaled(p.q(), root), scaled(p.k(), root)};
}

void require_dims(const AttentionProblem& p, const RandomFeatureMap& fm) {
  if (fm.dim() != p.c()) {
    throw ShapeError("feature map dimension " + std::to_string(fm.dim()) +
                     " does not match channel count " + std::to_string(p.c()));
  }
}

}  // namespace

RandomFeatureMap RandomFeatureMap::sample(std::size_t c, std::size_t r,
                                          std::uint64_t seed, bool include_ex,
                                          bool include_ey) {
  if (c == 0 || r == 0) throw ConfigError("feature map needs c >= 1 and r >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> data(r * c);
  for (double& v : data) v = gauss(rng);
  return RandomFeatureMap(DenseMatrix(r, c, std::move(data)), seed, include_ex,
                          include_ey);
}

RandomFeatureMap RandomFeatureMap::from_omegas(DenseMatrix omegas,
                                               bool include_ex,
                                               bool include_ey) {
  return RandomFeatureMap(std::move(omegas), 0, include_ex, include_ey);
}

std::size_t RandomFeatureMap::default_feature_count(std::size_t c) {
  const double r = std::ceil(static_cast<double>(c) *
                             std::log(static_cast<double>(c)));
  return r < 1.0 ? 1 : static_cast<std::size_t>(r);
}

RandomFeatureMap RandomFeatureMap::with_flags(bool include_ex,
                                              bool include_ey) const {
  return RandomFeatureMap(omegas_, seed_, include_ex, include_ey);
}

double performer_score(std::span<const double> x, std::span<const double> y,
                       const RandomFeatureMap& fm) {
  if (x.size() != fm.dim() || y.size() != fm.dim()) {
    throw ShapeError("performer_score: vectors of length " +
                     std::to_string(x.size()) + "/" + std::to_string(y.size()) +
                     " for a feature map of dimension " +
                     std::to_string(fm.dim()));
  }
  double sum = 0.0;
  for (std::size_t w = 0; w < fm.features(); ++w) {
    auto omega = fm.omegas().row(w);
    sum += std::exp(dot(omega, x)) * std::exp(dot(omega, y));
  }
  double estimate = sum / static_cast<double>(fm.features());
  if (fm.include_ex()) estimate *= std::exp(-half_sq_norm(x));
  if (fm.include_ey()) estimate *= std::exp(-half_sq_norm(y));
  if (!std::isfinite(estimate)) {
    throw OverflowError("performer_score overflowed");
  }
  return estimate;
}

DenseMatrix performer_features(const DenseMatrix& x, const RandomFeatureMap& fm,
                               FeatureSide side) {
  if (x.cols() != fm.dim()) {
    throw ShapeError("performer_features: input " + x.shape_string() +
                     " vs feature dimension " + std::to_string(fm.dim()));
  }
  DenseMatrix phi = elementwise_exp(matmul_transposed(x, fm.omegas()));
  const bool correct = side == FeatureSide::Query ? fm.include_ex() : fm.include_ey();
  const double inv_root_r = 1.0 / std::sqrt(static_cast<double>(fm.features()));
  for (std::size_t i = 0; i < phi.rows(); ++i) {
    const double factor =
        correct ? inv_root_r * std::exp(-half_sq_norm(x.row(i))) : inv_root_r;
    for (double& v : phi.row(i)) v *= factor;
  }
  return phi;
}

DenseMatrix performer_attention(const AttentionProblem& p,
                                const RandomFeatureMap& fm, AttentionMode mode) {
  require_dims(p, fm);
  const auto [q, k] = prepare_qk(p, mode);
  const DenseMatrix phi_q = performer_features(q, fm, FeatureSide::Query);
  const DenseMatrix phi_k = performer_features(k, fm, FeatureSide::Key);
  DenseMatrix out = matmul(phi_q, matmul(transpose(phi_k), p.v()));
  if (!mode.is_raw()) normalize_rows(out, phi_q, column_sums(phi_k), 1.0);
  return out;
}

DenseMatrix performer_attention_weights(const AttentionProblem& p,
                                        const RandomFeatureMap& fm,
                                        AttentionMode mode) {
  require_dims(p, fm);
  const auto [q, k] = prepare_qk(p, mode);
  DenseMatrix w = matmul_transposed(performer_features(q, fm, FeatureSide::Query),
                                    performer_features(k, fm, FeatureSide::Key));
  if (mode.is_raw()) return w;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double sum = 0.0;
    for (double v : w.row(i)) sum += v;
    if (!(sum >= kDegenerateDenominator)) {
      throw DegeneracyError("performer weights: row " + std::to_string(i) +
                            " sums below 1e-300");
    }
    for (double& v : w.row(i)) v /= sum;
  }
  return w;
}

DenseMatrix effatt_attention(const AttentionProblem& p, AttentionMode mode) {
  const auto [q, k] = prepare_qk(p, mode);
  const DenseMatrix exp_q = elementwise_exp(q);
  const DenseMatrix exp_k = elementwise_exp(k);
  const double inv_c = 1.0 / static_cast<double>(p.c());
  DenseMatrix out = matmul(exp_q, matmul(transpose(exp_k), p.v()));
  if (mode.is_raw()) return scaled(out, inv_c);
  // The 1/c prefactor cancels under normalization but is kept in both places
  // so the denominator matches its literal definition.
  out = scaled(out, inv_c);
  normalize_rows(out, exp_q, column_sums(exp_k), inv_c);
  return out;
}

}  // namespace elfatt
