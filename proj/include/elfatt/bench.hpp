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
#include <string>
#include <string_view>
#include <vector>

#include "elfatt/attention.hpp"

namespace elfatt {

// Q, K, V with entries i.i.d. uniform in [-magnitude, magnitude], drawn in
// that order from one mt19937_64 stream seeded with `seed`.
AttentionProblem generate_problem(std::size_t m, std::size_t c, std::uint64_t seed,
                                  double magnitude = 0.5,
                                  std::optional<Grid> grid = std::nullopt);

// Default seed: $ELFATT_SEED when set and numeric, otherwise `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 0);

struct BenchRecord {
  std::string mode;
  std::size_t m = 0, c = 0, c1 = 0, c2 = 0, b = 0;
  std::size_t repeats = 0;
  // Median wall-clock nanoseconds per forward; empty when timing is off.
  std::optional<std::int64_t> runtime_ns;
  std::uint64_t flops_est = 0;
  std::optional<double> rel_err;  // Frobenius, against vanilla output
  std::uint64_t seed = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

struct BlockSpec {
  enum class Kind { FixedLength, FixedCount };
  Kind kind = Kind::FixedLength;
  std::size_t value = 64;

  std::size_t blocks_for(std::size_t m) const;
};

struct SweepPlan {
  std::vector<std::size_t> lengths;
  BlockSpec blocks;
  std::size_t c = 64;
  std::vector<std::string> modes = {"elfatt", "vanilla"};
  int threads = 1;
  std::size_t repeats = 5;
  std::size_t warmups = 2;
  // Vanilla (and rel_err, which needs it) only runs for m <= this.
  std::size_t vanilla_cap = 4096;
  std::uint64_t seed = 0;
  double magnitude = 0.5;
  bool normalized = true;
  // Off: every forward runs once, runtime_ns stays empty, output is
  // deterministic.
  bool timing = true;
  // Performer feature count; unset means ceil(c ln c).
  std::optional<std::size_t> performer_features;

  // ConfigError / DivisibilityError before any work is done.
  void validate() const;
};

// Attention variants known to the harness.
const std::vector<std::string>& known_modes();

// Records ordered by (mode, m). Modes run under a thread count > 1 carry an
// "@<n>t" suffix.
std::vector<BenchRecord> run_sweep(const SweepPlan& plan);

// OLS slope of ln(runtime_ns) against ln(m); records must share one mode and
// provide at least 4 distinct m.
double fit_loglog_slope(const std::vector<BenchRecord>& records);

inline constexpr std::string_view kSweepCsvHeader =
    "mode,m,c,c1,c2,b,repeats,runtime_ns,flops_est,rel_err,seed";

std::string emit_csv(std::vector<BenchRecord> records);
std::vector<BenchRecord> parse_sweep_csv(std::string_view text);

// Log-log polyline per mode. Plots runtime when every record has one,
// otherwise the flops estimate.
std::string emit_scaling_plot(const std::vector<BenchRecord>& records);

}  // namespace elfatt
