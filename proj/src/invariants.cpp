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

#include "elfatt/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "elfatt/attention.hpp"
#include "elfatt/bench.hpp"
#include "elfatt/bounds.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/error.hpp"
#include "elfatt/kernel_approx.hpp"
#include "elfatt/matrix.hpp"
#include "elfatt/matrix_io.hpp"

namespace elfatt {
namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                          double mag = 1.0) {
  std::uniform_real_distribution<double> dist(-mag, mag);
  std::vector<double> d(rows * cols);
  for (double& x : d) x = dist(rng);
  return DenseMatrix(rows, cols, std::move(d));
}

double rel_diff(const DenseMatrix& exact, const DenseMatrix& approx) {
  const double den = frobenius_norm(exact);
  const double num = frobenius_norm(subtract(exact, approx));
  return den == 0.0 ? num : num / den;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// Sets `detail` to the first failure; returns whether the check passed.
class Check {
 public:
  void fail(std::string msg) {
    if (ok_) detail_ = std::move(msg);
    ok_ = false;
  }
  void expect(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
  }
  void note(std::string msg) {
    if (ok_) detail_ = std::move(msg);
  }
  bool ok() const { return ok_; }
  const std::string& detail() const { return detail_; }

 private:
  bool ok_ = true;
  std::string detail_;
};

using CheckFn = std::function<void(Check&, std::mt19937_64&)>;

void matmul_vs_loops(Check& ck, std::mt19937_64& rng) {
  for (std::size_t n : {1u, 3u, 7u, 16u, 32u}) {
    const auto a = random_matrix(rng, n, n + 1);
    const auto b = random_matrix(rng, n + 1, n + 2);
    const auto got = matmul(a, b);
    DenseMatrix want(n, n + 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n + 2; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < n + 1; ++k) s += a(i, k) * b(k, j);
        want(i, j) = s;
      }
    const double r = rel_diff(want, got);
    ck.expect(r <= 1e-12, "n=" + std::to_string(n) + " rel " + num(r));
  }
}

void submultiplicative(Check& ck, std::mt19937_64& rng) {
  for (int t = 0; t < 100; ++t) {
    const auto a = random_matrix(rng, 6, 5);
    const auto b = random_matrix(rng, 5, 4);
    const auto ab = matmul(a, b);
    const double f = frobenius_norm(ab), fa = frobenius_norm(a), fb = frobenius_norm(b);
    ck.expect(f <= fa * fb * (1 + 1e-9), "frobenius, pair " + std::to_string(t));
    const auto s = spectral_norm(ab), sa = spectral_norm(a), sb = spectral_norm(b);
    const double margin = (1 + sa.gap) * (1 + sb.gap) * (1 + 1e-9);
    ck.expect(s.value <= sa.value * sb.value * margin, "spectral, pair " + std::to_string(t));
    ck.expect(sa.value <= fa * (1 + 1e-12), "spectral > frobenius");
  }
}

void softmax_rows(Check& ck, std::mt19937_64& rng) {
  auto a = random_matrix(rng, 9, 11, 3.0);
  const auto s = row_softmax(a, 0.7);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const double sum = std::accumulate(s.row(i).begin(), s.row(i).end(), 0.0);
    ck.expect(std::abs(sum - 1.0) <= 1e-12, "row sum " + num(sum));
  }
  for (std::size_t j = 0; j < a.cols(); ++j) a(2, j) += 5.0;
  const auto shifted = row_softmax(a, 0.7);
  ck.expect(max_abs(subtract(s, shifted)) <= 1e-12, "not shift invariant");
}

void vanilla_properties(Check& ck, std::mt19937_64& rng) {
  const std::size_t m = 12, c = 4;
  const AttentionProblem p(random_matrix(rng, m, c), random_matrix(rng, m, c),
                           random_matrix(rng, m, c));
  const auto mode = AttentionMode::normalized();
  const auto out = vanilla_attention(p, mode);
  ck.expect(masked_vanilla_attention(p, BlockMask(m, 1), mode) == out,
            "b=1 mask differs from vanilla");
  ck.expect(masked_vanilla_attention(p, BlockMask(m, 1), AttentionMode::raw_exp()) ==
                vanilla_attention(p, AttentionMode::raw_exp()),
            "b=1 mask differs from vanilla (raw)");

  for (std::size_t j = 0; j < c; ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < m; ++i) lo = std::min(lo, p.v()(i, j)), hi = std::max(hi, p.v()(i, j));
    for (std::size_t i = 0; i < m; ++i) {
      ck.expect(out(i, j) >= lo - 1e-12 && out(i, j) <= hi + 1e-12,
                "output outside value hull");
    }
  }

  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute = [&](const DenseMatrix& x) {
    DenseMatrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(perm[i], j);
    return y;
  };
  const AttentionProblem pp(permute(p.q()), permute(p.k()), permute(p.v()));
  ck.expect(rel_diff(permute(out), vanilla_attention(pp, mode)) <= 1e-12,
            "not permutation equivariant");
}

void sparse_head_identity(Check& ck, std::mt19937_64& rng) {
  for (std::size_t m : {8u, 16u, 64u}) {
    for (std::size_t b : {std::size_t{1}, std::size_t{2}, std::size_t{4}, m / 4}) {
      const AttentionProblem p(random_matrix(rng, m, 2, 0.5), random_matrix(rng, m, 2, 0.5),
                               random_matrix(rng, m, 2, 0.5));
      const auto mode = AttentionMode::raw_exp();
      const double r = rel_diff(masked_vanilla_attention(p, BlockMask(m, b), mode),
                                block_sparse_head(p, b, mode));
      ck.expect(r <= 1e-12, "m=" + std::to_string(m) + " b=" + std::to_string(b) +
                                " rel " + num(r));
    }
  }
}

void blockify_roundtrip(Check& ck, std::mt19937_64& rng) {
  const auto a = random_matrix(rng, 24, 3);
  for (std::size_t b : {1u, 2u, 3u, 4u, 6u, 24u}) {
    const auto blocks = blockify(a, b);
    ck.expect(unblockify(blocks) == a, "b=" + std::to_string(b));
  }
}

void head_independence(Check& ck, std::mt19937_64& rng) {
  const std::size_t m = 16, c = 6;
  const HeadSplitConfig cfg{3, 3, 4};
  const AttentionProblem p(random_matrix(rng, m, c, 0.5), random_matrix(rng, m, c, 0.5),
                           random_matrix(rng, m, c, 0.5));
  const auto base = elfatt_forward(p, cfg, AttentionMode::normalized());
  // Perturb the tilded half: barred columns must not move, and vice versa.
  auto perturb = [&](std::size_t begin, std::size_t count) {
    DenseMatrix q = p.q(), k = p.k(), v = p.v();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = begin; j < begin + count; ++j) {
        q(i, j) += 0.1;
        k(i, j) -= 0.2;
        v(i, j) += 0.3;
      }
    return elfatt_forward(AttentionProblem(q, k, v), cfg, AttentionMode::normalized());
  };
  const auto t = perturb(3, 3);
  ck.expect(column_slice(t, 0, 3) == column_slice(base, 0, 3), "barred depends on tilded");
  const auto g = perturb(0, 3);
  ck.expect(column_slice(g, 3, 3) == column_slice(base, 3, 3), "tilded depends on barred");
}

void ex_cancellation(Check& ck, std::mt19937_64& rng) {
  for (int t = 0; t < 10; ++t) {
    const AttentionProblem p(random_matrix(rng, 16, 4, 0.5), random_matrix(rng, 16, 4, 0.5),
                             random_matrix(rng, 16, 4, 0.5));
    const auto fm = RandomFeatureMap::sample(4, 32, rng());
    const auto on = performer_attention_weights(p, fm.with_flags(true, true),
                                                AttentionMode::normalized(1.0));
    const auto off = performer_attention_weights(p, fm.with_flags(false, true),
                                                 AttentionMode::normalized(1.0));
    const double d = max_abs(subtract(on, off));
    ck.expect(d <= 1e-12, "max entry gap " + num(d));
  }
}

void linear_footprint(Check& ck, std::mt19937_64& rng) {
  const std::size_t m = 256, c = 8;
  const AttentionProblem p(random_matrix(rng, m, c, 0.5), random_matrix(rng, m, c, 0.5),
                           random_matrix(rng, m, c, 0.5));
  {
    AllocationProbe probe;
    (void)effatt_attention(p, AttentionMode::raw_exp());
    ck.expect(probe.peak_entries() <= std::max(m, c) * c,
              "effatt peak " + std::to_string(probe.peak_entries()));
  }
  {
    AllocationProbe probe;
    (void)elfatt_forward(p, HeadSplitConfig{4, 4, 16}, AttentionMode::normalized());
    ck.expect(probe.peak_entries() < m * m,
              "elfatt peak " + std::to_string(probe.peak_entries()));
  }
  {
    const auto fm = RandomFeatureMap::sample(c, 17, 1);
    AllocationProbe probe;
    (void)performer_attention(p, fm, AttentionMode::normalized());
    ck.expect(probe.peak_entries() < m * m,
              "performer peak " + std::to_string(probe.peak_entries()));
  }
}

void lemma1_zero_equality(Check& ck, std::mt19937_64& rng) {
  const std::vector<double> zero(4, 0.0);
  const auto z = lemma1_bounds(zero, zero);
  ck.expect(std::abs(z.lower - z.upper) <= 1e-12 * z.upper, "sandwich not tight at zero");
  ck.expect(std::abs(z.ratio - z.upper) <= 1e-12 * z.upper, "ratio off at zero");
  for (int t = 0; t < 50; ++t) {
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    std::vector<double> q(4), k(4);
    for (auto& x : q) x = d(rng);
    for (auto& x : k) x = d(rng);
    const auto l = lemma1_bounds(q, k);
    ck.expect(l.lower <= l.ratio * (1 + 1e-12) && l.ratio <= l.upper * (1 + 1e-12),
              "sandwich violated");
  }
}

void bound_soundness(Check& ck, std::mt19937_64& rng, std::size_t instances,
                     bool& saw_small, bool& saw_big) {
  for (std::size_t m : {8u, 16u, 32u}) {
    for (std::size_t half : {2u, 4u}) {
      for (std::size_t b : {std::size_t{1}, std::size_t{2}, std::size_t{4}, m}) {
        for (NormKind kind : {NormKind::Frobenius, NormKind::Spectral}) {
          for (std::size_t t = 0; t < instances; ++t) {
            const auto p = generate_problem(m, 2 * half, rng(), 0.5);
            const HeadSplitConfig cfg{half, half, b};
            const auto split = split_channels(p, cfg);
            const auto& bar = *split.barred;
            const auto& til = *split.tilded;
            const auto stats = corollary1_stats(bar.q(), bar.k());
            const auto s = pair_statistics(bar.q(), bar.k(), 0, m - 1);
            ck.expect(stats.ratio_lower() <= s.lower * (1 + 1e-12) &&
                          s.upper <= stats.ratio_upper() * (1 + 1e-12),
                      "corollary sandwich");
            const BoundReport reports[] = {
                theorem1_bound(bar.q(), bar.k(), til.q(), til.k(), kind),
                total_bound_single_head(p, cfg, kind),
                total_bound_double_head(p, cfg, kind),
                effatt_decomposition_bound(p, cfg, kind),
                elfatt_decomposition_bound(p, cfg, kind),
                local_decomposition_bound(p, cfg, kind)};
            for (const auto& r : reports) {
              if (r.branch) {
                (*r.branch == TheoremBranch::SmallM ? saw_small : saw_big) = true;
              }
              if (!r.holds()) {
                ck.fail(r.name + " m=" + std::to_string(m) + " c1=" +
                        std::to_string(half) + " b=" + std::to_string(b) + " " +
                        to_string(kind) + ": " + num(r.measured_error) + " > " +
                        num(r.bound_value));
              }
            }
          }
        }
      }
    }
  }
}

void lepe_identities(Check& ck, std::mt19937_64& rng) {
  const Grid grid{4, 5};
  const auto v = random_matrix(rng, 20, 3);
  ck.expect(lepe(v, grid, DepthwiseKernel::delta(3)) == v, "delta kernel not identity");
  ck.expect(max_abs(lepe(v, grid, DepthwiseKernel::zeros(3))) == 0.0,
            "zero kernel not null");
  const auto w = random_matrix(rng, 3, 9);
  const auto kernel = DepthwiseKernel::from_matrix(w);
  const auto out = lepe(v, grid, kernel);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < grid.height; ++y)
      for (std::size_t x = 0; x < grid.width; ++x) {
        double s = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= 4 || xx >= 5) continue;
            s += w(ch, static_cast<std::size_t>((dy + 1) * 3 + dx + 1)) *
                 v(static_cast<std::size_t>(yy * 5 + xx), ch);
          }
        ck.expect(std::abs(out(y * 5 + x, ch) - s) <= 1e-12, "tap mismatch");
      }
}

void degenerate_configs(Check& ck, std::mt19937_64& rng) {
  const std::size_t m = 16, c = 4;
  const AttentionProblem p(random_matrix(rng, m, c, 0.5), random_matrix(rng, m, c, 0.5),
                           random_matrix(rng, m, c, 0.5));
  for (auto mode : {AttentionMode::raw_exp(), AttentionMode::normalized()}) {
    ck.expect(rel_diff(block_sparse_head(p, 4, mode),
                       elfatt_forward(p, HeadSplitConfig{0, c, 4}, mode)) <= 1e-12,
              "c1=0 differs from local");
    ck.expect(rel_diff(global_linear_head(p, mode),
                       elfatt_forward(p, HeadSplitConfig{c, 0, 1}, mode)) <= 1e-12,
              "c1=c differs from global head");
    ck.expect(rel_diff(vanilla_attention(p, mode), block_sparse_head(p, 1, mode)) <= 1e-12,
              "b=1 differs from vanilla");
  }
}

void io_roundtrip(Check& ck, std::mt19937_64& rng) {
  auto a = random_matrix(rng, 5, 7, 1e6);
  a(0, 0) = 5e-324;
  a(1, 1) = -0.0;
  a(2, 2) = 1.7976931348623157e308;
  std::stringstream s;
  write_elf1(s, a);
  ck.expect(read_elf1(s) == a, "ELF1 round trip");
  ck.expect(parse_csv(to_csv(a)) == a, "CSV round trip");

  BenchRecord r{"elfatt", 256, 64, 32, 32, 4, 5, 12345, 999, 0.125, 7};
  BenchRecord r2{"vanilla", 256, 64, 32, 32, 4, 1, std::nullopt, 999, std::nullopt, 7};
  const auto back = parse_sweep_csv(emit_csv({r2, r}));
  ck.expect(back.size() == 2 && back[0] == r && back[1] == r2, "sweep CSV round trip");
}

}  // namespace

std::vector<InvariantResult> run_invariant_suite(const InvariantOptions& options) {
  bool saw_small = false, saw_big = false;
  const std::vector<std::pair<std::string, CheckFn>> checks = {
      {"matmul_matches_triple_loop", matmul_vs_loops},
      {"norm_submultiplicative", submultiplicative},
      {"softmax_rows_sum_to_one", softmax_rows},
      {"vanilla_mask_permutation_hull", vanilla_properties},
      {"sparse_head_equals_masked_attention", sparse_head_identity},
      {"blockify_roundtrip", blockify_roundtrip},
      {"head_independence", head_independence},
      {"ex_factor_cancels", ex_cancellation},
      {"linear_modes_avoid_quadratic_buffers", linear_footprint},
      {"lemma1_sandwich", lemma1_zero_equality},
      {"bound_soundness",
       [&](Check& ck, std::mt19937_64& rng) {
         bound_soundness(ck, rng, options.bound_instances, saw_small, saw_big);
       }},
      {"theorem_branches_both_fire",
       [&](Check& ck, std::mt19937_64& rng) {
         // Escalation ladder: wider inputs first, then a single global channel.
         struct Rung {
           std::size_t c1;
           double magnitude;
         };
         const Rung ladder[] = {{2, 1.0}, {2, 2.0}, {1, 0.5}, {1, 1.0}};
         for (const auto& rung : ladder) {
           if (saw_small && saw_big) break;
           for (int t = 0; t < 200 && !(saw_small && saw_big); ++t) {
             const auto p = generate_problem(8, rung.c1 + 2, rng(), rung.magnitude);
             const auto s = split_channels(p, HeadSplitConfig{rung.c1, 2, 2});
             const auto r = theorem1_bound(s.barred->q(), s.barred->k(),
                                           s.tilded->q(), s.tilded->k(),
                                           NormKind::Frobenius);
             (*r.branch == TheoremBranch::SmallM ? saw_small : saw_big) = true;
           }
           if (saw_small && saw_big) {
             ck.note("both branches reached after escalating to c1=" +
                     std::to_string(rung.c1) + ", magnitude " + num(rung.magnitude));
           }
         }
         ck.expect(saw_small, "small_m branch never selected");
         ck.expect(saw_big, "big_m branch never selected");
       }},
      {"lepe_kernels", lepe_identities},
      {"degenerate_split_equalities", degenerate_configs},
      {"io_roundtrip", io_roundtrip},
  };

  std::vector<InvariantResult> results;
  std::uint64_t salt = 0;
  for (const auto& [name, fn] : checks) {
    std::mt19937_64 rng(options.seed * 1000003ULL + (++salt));
    Check ck;
    try {
      fn(ck, rng);
    } catch (const std::exception& e) {
      ck.fail(std::string("exception: ") + e.what());
    }
    results.push_back({name, ck.ok(), ck.detail()});
  }
  return results;
}

}  // namespace elfatt
