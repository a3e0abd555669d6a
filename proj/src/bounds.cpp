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

#include "elfatt/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "elfatt/error.hpp"
#include "elfatt/matrix_io.hpp"

namespace elfatt {
namespace {

const double kExpMinusHalf = std::exp(-0.5);

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double checked_exp(double x, const char* what) {
  const double v = std::exp(x);
  if (!std::isfinite(v)) {
    throw OverflowError(std::string(what) + ": exp overflow at exponent " +
                        format_double(x));
  }
  return v;
}

// A norm value plus the relative uncertainty of its estimate.
struct Measured {
  double value = 0.0;
  double gap = 0.0;
};

Measured measure(const DenseMatrix& a, NormKind kind) {
  if (kind == NormKind::Frobenius) return {frobenius_norm(a), 0.0};
  const auto est = spectral_norm(a);
  return {est.value, est.gap};
}

// Accumulates bound terms and the margin implied by their norm estimates.
class TermBuilder {
 public:
  void term(std::string name, double coefficient,
            std::initializer_list<Measured> factors) {
    double value = coefficient;
    double gap = 0.0;
    for (const auto& f : factors) {
      value *= f.value;
      gap += f.gap;
    }
    margin_ += std::abs(value) * gap;
    terms_.push_back({std::move(name), value});
  }

  void finish(BoundReport& report, const Measured& measured) const {
    report.component_terms = terms_;
    report.bound_value = report.component_sum();
    report.measured_error = measured.value;
    report.tolerance = 1e-9 * std::abs(report.bound_value) + margin_ +
                       measured.value * measured.gap;
  }

 private:
  std::vector<BoundTerm> terms_;
  double margin_ = 0.0;
};

struct Halves {
  DenseMatrix qb, kb, vb, qt, kt, vt;
};

Halves split_for_bounds(const AttentionProblem& p, const HeadSplitConfig& cfg) {
  cfg.validate(p);
  if (cfg.c1 == 0 || cfg.c2 == 0) {
    throw ConfigError("bound evaluation needs c1 >= 1 and c2 >= 1");
  }
  const auto split = split_channels(p, cfg);
  const auto& b = *split.barred;
  const auto& t = *split.tilded;
  return {b.q(), b.k(), b.v(), t.q(), t.k(), t.v()};
}

DenseMatrix exp_scores(const DenseMatrix& q, const DenseMatrix& k) {
  return elementwise_exp(matmul_transposed(q, k));
}

DenseMatrix linearized(const DenseMatrix& q, const DenseMatrix& k) {
  return matmul_transposed(elementwise_exp(q), elementwise_exp(k));
}

struct BranchChoice {
  TheoremBranch branch;
  double coefficient;
};

BranchChoice choose_branch(const BoundStatistics& stats) {
  const double upper_dev = std::abs(stats.ratio_upper() - 1.0);
  const double lower_dev = std::abs(stats.ratio_lower() - 1.0);
  if (upper_dev >= lower_dev) return {TheoremBranch::SmallM, upper_dev};
  return {TheoremBranch::BigM, lower_dev};
}

void add_stat_diagnostics(BoundReport& r, const BoundStatistics& stats) {
  r.diagnostics.push_back({"big_m", stats.big_m});
  r.diagnostics.push_back({"small_m", stats.small_m});
  r.diagnostics.push_back({"ratio_lower", stats.ratio_lower()});
  r.diagnostics.push_back({"ratio_upper", stats.ratio_upper()});
}

// Shared pieces of the two ELFATT total bounds.
struct ElfattPieces {
  Halves h;
  BoundStatistics stats;
  BranchChoice choice;
  DenseMatrix exp_bar, exp_tilde, ones, z;
  Measured exp_bar_n, exp_tilde_n, vb_n, vt_n;
};

ElfattPieces elfatt_pieces(const AttentionProblem& p, const HeadSplitConfig& cfg,
                           NormKind kind) {
  Halves h = split_for_bounds(p, cfg);
  auto stats = corollary1_stats(h.qb, h.kb);
  auto choice = choose_branch(stats);
  DenseMatrix exp_bar = exp_scores(h.qb, h.kb);
  DenseMatrix exp_tilde = exp_scores(h.qt, h.kt);
  DenseMatrix ones = DenseMatrix::ones(p.m(), p.m());
  DenseMatrix z = BlockMask(p.m(), cfg.b).materialize();
  const auto ebn = measure(exp_bar, kind);
  const auto etn = measure(exp_tilde, kind);
  const auto vbn = measure(h.vb, kind);
  const auto vtn = measure(h.vt, kind);
  return {std::move(h),       stats,          choice,
          std::move(exp_bar), std::move(exp_tilde), std::move(ones),
          std::move(z),       ebn,            etn,
          vbn,                vtn};
}

}  // namespace

Lemma1Bounds lemma1_bounds(std::span<const double> qbar,
                           std::span<const double> kbar) {
  if (qbar.empty() || qbar.size() != kbar.size()) {
    throw ShapeError("lemma1_bounds: vectors must share a positive length");
  }
  const double qk = dot(qbar, kbar);
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  double numerator = 0.0;
  for (std::size_t i = 0; i < qbar.size(); ++i) {
    const double e = qk + 0.5 - (qbar[i] + kbar[i]);
    hi = std::max(hi, e);
    lo = std::min(lo, e);
    numerator += checked_exp(qbar[i], "lemma1_bounds") *
                 checked_exp(kbar[i], "lemma1_bounds");
  }
  Lemma1Bounds out;
  out.big_d = checked_exp(hi, "lemma1_bounds");
  out.small_d = checked_exp(lo, "lemma1_bounds");
  out.ratio = numerator / checked_exp(qk, "lemma1_bounds");
  const double c1 = static_cast<double>(qbar.size());
  out.lower = c1 / (out.big_d * kExpMinusHalf);
  out.upper = c1 / (out.small_d * kExpMinusHalf);
  if (!std::isfinite(out.ratio) || !std::isfinite(out.upper)) {
    throw OverflowError("lemma1_bounds: non-finite ratio or bound");
  }
  return out;
}

double BoundStatistics::ratio_lower() const {
  return static_cast<double>(c1) / (big_m * kExpMinusHalf);
}

double BoundStatistics::ratio_upper() const {
  return static_cast<double>(c1) / (small_m * kExpMinusHalf);
}

BoundStatistics corollary1_stats(const DenseMatrix& qbar, const DenseMatrix& kbar) {
  if (qbar.rows() != kbar.rows() || qbar.cols() != kbar.cols()) {
    throw ShapeError("corollary1_stats: Qb " + qbar.shape_string() + " vs Kb " +
                     kbar.shape_string());
  }
  if (qbar.rows() > kMaxStatisticsLength) {
    throw ConfigError("corollary1_stats is brute force; m=" +
                      std::to_string(qbar.rows()) + " exceeds " +
                      std::to_string(kMaxStatisticsLength));
  }
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i1 = 0; i1 < qbar.rows(); ++i1) {
    auto q = qbar.row(i1);
    for (std::size_t i2 = 0; i2 < kbar.rows(); ++i2) {
      auto k = kbar.row(i2);
      const double qk = dot(q, k);
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double e = qk + 0.5 - (q[j] + k[j]);
        hi = std::max(hi, e);
        lo = std::min(lo, e);
      }
    }
  }
  BoundStatistics stats;
  stats.big_m = checked_exp(hi, "corollary1_stats");
  stats.small_m = checked_exp(lo, "corollary1_stats");
  stats.c1 = qbar.cols();
  return stats;
}

Lemma1Bounds pair_statistics(const DenseMatrix& qbar, const DenseMatrix& kbar,
                             std::size_t i1, std::size_t i2) {
  if (i1 >= qbar.rows() || i2 >= kbar.rows()) {
    throw ShapeError("pair_statistics: row index out of range");
  }
  return lemma1_bounds(qbar.row(i1), kbar.row(i2));
}

const char* to_string(TheoremBranch branch) noexcept {
  return branch == TheoremBranch::SmallM ? "small_m" : "big_m";
}

double BoundReport::component_sum() const noexcept {
  double s = 0.0;
  for (const auto& t : component_terms) s += t.value;
  return s;
}

const BoundTerm* BoundReport::diagnostic(const std::string& key) const noexcept {
  for (const auto& d : diagnostics) {
    if (d.name == key) return &d;
  }
  return nullptr;
}

std::string BoundReport::to_key_value() const {
  std::ostringstream out;
  out << "name=" << name << '\n';
  out << "norm=" << to_string(norm_kind) << '\n';
  out << "measured_error=" << format_double(measured_error) << '\n';
  out << "bound_value=" << format_double(bound_value) << '\n';
  out << "tolerance=" << format_double(tolerance) << '\n';
  out << "holds=" << (holds() ? "true" : "false") << '\n';
  if (branch) out << "branch=" << to_string(*branch) << '\n';
  for (const auto& t : component_terms) {
    out << "term." << t.name << '=' << format_double(t.value) << '\n';
  }
  for (const auto& d : diagnostics) {
    out << "diag." << d.name << '=' << format_double(d.value) << '\n';
  }
  if (!note.empty()) out << "note=" << note << '\n';
  return out.str();
}

BoundReport theorem1_bound(const DenseMatrix& qbar, const DenseMatrix& kbar,
                           const DenseMatrix& qtilde, const DenseMatrix& ktilde,
                           NormKind kind) {
  if (qbar.rows() != qtilde.rows() || kbar.rows() != ktilde.rows() ||
      qtilde.cols() != ktilde.cols()) {
    throw ShapeError("theorem1_bound: inconsistent halves");
  }
  const auto stats = corollary1_stats(qbar, kbar);
  const auto choice = choose_branch(stats);
  const DenseMatrix exp_bar = exp_scores(qbar, kbar);
  const DenseMatrix exp_tilde = exp_scores(qtilde, ktilde);
  const DenseMatrix ones = DenseMatrix::ones(qbar.rows(), kbar.rows());

  const auto measured =
      measure(subtract(linearized(qbar, kbar), hadamard(exp_bar, exp_tilde)), kind);
  const auto eb = measure(exp_bar, kind);
  const auto et = measure(exp_tilde, kind);

  BoundReport r;
  r.name = "theorem1";
  r.norm_kind = kind;
  r.branch = choice.branch;
  TermBuilder terms;
  terms.term("upper_ratio_x_ones_gap", stats.ratio_upper(),
             {eb, measure(subtract(ones, exp_tilde), kind)});
  terms.term("branch_coefficient_x_exp_tilde", choice.coefficient, {eb, et});
  terms.finish(r, measured);
  add_stat_diagnostics(r, stats);
  return r;
}

BoundReport total_bound_single_head(const AttentionProblem& p,
                                    const HeadSplitConfig& cfg, NormKind kind) {
  const auto pc = elfatt_pieces(p, cfg, kind);
  const auto raw = AttentionMode::raw_exp();
  const auto measured =
      measure(subtract(elfatt_forward(p, cfg, raw), vanilla_attention(p, raw)), kind);
  const auto ones_gap = measure(subtract(pc.ones, pc.exp_tilde), kind);

  BoundReport r;
  r.name = "total_single_head";
  r.norm_kind = kind;
  r.branch = pc.choice.branch;
  TermBuilder terms;
  terms.term("global_ones_gap", pc.stats.ratio_upper(),
             {ones_gap, pc.exp_bar_n, pc.vb_n});
  terms.term("global_branch", pc.choice.coefficient,
             {pc.exp_tilde_n, pc.exp_bar_n, pc.vb_n});
  terms.term("sparse", 1.0,
             {measure(subtract(pc.z, pc.exp_bar), kind), pc.exp_tilde_n, pc.vt_n});
  terms.finish(r, measured);

  // Right-hand side of the triangle-inequality split before the theorem is
  // applied; it sits between measured and bound.
  const DenseMatrix joint = hadamard(pc.exp_bar, pc.exp_tilde);
  const double split_rhs =
      measure(subtract(linearized(pc.h.qb, pc.h.kb), joint), kind).value *
          pc.vb_n.value +
      measure(subtract(hadamard(pc.exp_tilde, pc.z), joint), kind).value *
          pc.vt_n.value;
  r.diagnostics.push_back({"split_rhs", split_rhs});
  add_stat_diagnostics(r, pc.stats);
  return r;
}

BoundReport total_bound_double_head(const AttentionProblem& p,
                                    const HeadSplitConfig& cfg, NormKind kind) {
  const auto pc = elfatt_pieces(p, cfg, kind);
  const auto raw = AttentionMode::raw_exp();
  const auto measured = measure(
      subtract(elfatt_forward(p, cfg, raw), double_head_reference(p, cfg, raw)),
      kind);

  BoundReport r;
  r.name = "total_double_head";
  r.norm_kind = kind;
  r.branch = pc.choice.branch;
  TermBuilder terms;
  terms.term("global_branch", pc.choice.coefficient, {pc.exp_bar_n, pc.vb_n});
  terms.term("sparse", 1.0,
             {measure(subtract(pc.z, pc.ones), kind), pc.exp_tilde_n, pc.vt_n});
  terms.finish(r, measured);

  const double split_rhs =
      measure(subtract(linearized(pc.h.qb, pc.h.kb), pc.exp_bar), kind).value *
          pc.vb_n.value +
      measure(subtract(hadamard(pc.exp_tilde, pc.z), pc.exp_tilde), kind).value *
          pc.vt_n.value;
  r.diagnostics.push_back({"split_rhs", split_rhs});
  r.diagnostics.push_back(
      {"single_head_bound", total_bound_single_head(p, cfg, kind).bound_value});
  add_stat_diagnostics(r, pc.stats);
  return r;
}

namespace {

BoundReport decomposition_report(std::string name, const DenseMatrix& approx_bar,
                                 const DenseMatrix& exact_bar,
                                 const DenseMatrix& approx_tilde,
                                 const DenseMatrix& exact_tilde, NormKind kind) {
  const auto measured =
      measure(subtract(hcat(approx_bar, approx_tilde), hcat(exact_bar, exact_tilde)),
              kind);
  BoundReport r;
  r.name = std::move(name);
  r.norm_kind = kind;
  TermBuilder terms;
  terms.term("barred", 1.0, {measure(subtract(approx_bar, exact_bar), kind)});
  terms.term("tilded", 1.0, {measure(subtract(approx_tilde, exact_tilde), kind)});
  terms.finish(r, measured);
  return r;
}

}  // namespace

BoundReport effatt_decomposition_bound(const AttentionProblem& p,
                                       const HeadSplitConfig& cfg, NormKind kind) {
  const Halves h = split_for_bounds(p, cfg);
  const DenseMatrix exact_bar = exp_scores(h.qb, h.kb);
  const DenseMatrix exact_tilde = exp_scores(h.qt, h.kt);
  BoundReport r = decomposition_report("effatt_decomposition",
                                       linearized(h.qb, h.kb), exact_bar,
                                       linearized(h.qt, h.kt), exact_tilde, kind);
  // Corollary-based envelopes of each half.
  const auto sb = corollary1_stats(h.qb, h.kb);
  const auto st = corollary1_stats(h.qt, h.kt);
  r.diagnostics.push_back({"barred_envelope", choose_branch(sb).coefficient *
                                                  measure(exact_bar, kind).value});
  r.diagnostics.push_back({"tilded_envelope", choose_branch(st).coefficient *
                                                  measure(exact_tilde, kind).value});
  return r;
}

BoundReport elfatt_decomposition_bound(const AttentionProblem& p,
                                       const HeadSplitConfig& cfg, NormKind kind) {
  const Halves h = split_for_bounds(p, cfg);
  const DenseMatrix exact_tilde = exp_scores(h.qt, h.kt);
  const DenseMatrix z = BlockMask(p.m(), cfg.b).materialize();
  return decomposition_report("elfatt_decomposition", linearized(h.qb, h.kb),
                              exp_scores(h.qb, h.kb), hadamard(exact_tilde, z),
                              exact_tilde, kind);
}

BoundReport local_decomposition_bound(const AttentionProblem& p,
                                      const HeadSplitConfig& cfg, NormKind kind) {
  const Halves h = split_for_bounds(p, cfg);
  const DenseMatrix exact_bar = exp_scores(h.qb, h.kb);
  const DenseMatrix exact_tilde = exp_scores(h.qt, h.kt);
  const DenseMatrix z = BlockMask(p.m(), cfg.b).materialize();
  BoundReport r =
      decomposition_report("local_decomposition", hadamard(exact_bar, z),
                           exact_bar, hadamard(exact_tilde, z), exact_tilde, kind);
  r.note = "block-diagonal surrogate for the cross-shaped window masks";
  return r;
}

double relative_error(const DenseMatrix& exact, const DenseMatrix& approx,
                      NormKind kind) {
  const double denom = norm(exact, kind);
  if (denom == 0.0) {
    throw DegeneracyError("relative_error: reference matrix has zero norm");
  }
  return norm(subtract(exact, approx), kind) / denom;
}

FlopsEstimate flops_estimate(std::size_t m, const HeadSplitConfig& cfg) {
  cfg.validate(m, cfg.c1 + cfg.c2);
  const auto mm = static_cast<std::uint64_t>(m);
  const auto c1 = static_cast<std::uint64_t>(cfg.c1);
  const auto c2 = static_cast<std::uint64_t>(cfg.c2);
  FlopsEstimate f;
  f.global_head = mm > c1 ? mm * c1 * c1 : mm * mm * c1;
  f.sparse_head = c2 == 0 ? 0 : (mm * mm / cfg.b) * c2;
  f.vanilla = mm * mm * (c1 + c2);
  return f;
}

}  // namespace elfatt
