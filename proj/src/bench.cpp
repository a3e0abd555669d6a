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

#include "elfatt/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "elfatt/bounds.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/error.hpp"
#include "elfatt/kernel_approx.hpp"
#include "elfatt/matrix_io.hpp"
#include "elfatt/parallel.hpp"

namespace elfatt {
namespace {

DenseMatrix uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                           double magnitude) {
  std::uniform_real_distribution<double> dist(-magnitude, magnitude);
  std::vector<double> data(rows * cols);
  for (double& v : data) v = dist(rng);
  return DenseMatrix(rows, cols, std::move(data));
}

std::uint64_t mode_flops(const std::string& mode, std::size_t m, std::size_t c,
                         const HeadSplitConfig& cfg, std::size_t features) {
  const auto mm = static_cast<std::uint64_t>(m);
  const auto cc = static_cast<std::uint64_t>(c);
  if (mode == "vanilla") return mm * mm * cc;
  if (mode == "elfatt") {
    const auto f = flops_estimate(m, cfg);
    return f.global_head + f.sparse_head;
  }
  if (mode == "effatt") return mm > cc ? mm * cc * cc : mm * mm * cc;
  if (mode == "performer") return mm * static_cast<std::uint64_t>(features) * cc;
  return (mm * mm / cfg.b) * cc;  // local
}

// Largest intermediate (entries) a linear-memory mode may allocate.
std::size_t footprint_limit(const std::string& mode, std::size_t m, std::size_t c,
                            std::size_t b, std::size_t features) {
  const std::size_t len = m / b;
  if (mode == "elfatt") return std::max(m * c, len * len);
  if (mode == "effatt") return std::max(m, c) * c;
  if (mode == "performer") return m * std::max(c, features);
  return 0;
}

double median_ns(std::vector<std::int64_t> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  if (n % 2 == 1) return static_cast<double>(samples[n / 2]);
  return 0.5 * static_cast<double>(samples[n / 2 - 1] + samples[n / 2]);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_int(std::string_view s, const char* field) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IoError(std::string("sweep CSV: bad ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

AttentionProblem generate_problem(std::size_t m, std::size_t c, std::uint64_t seed,
                                  double magnitude, std::optional<Grid> grid) {
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) {
    throw ConfigError("magnitude must be finite and positive");
  }
  std::mt19937_64 rng(seed);
  DenseMatrix q = uniform_matrix(rng, m, c, magnitude);
  DenseMatrix k = uniform_matrix(rng, m, c, magnitude);
  DenseMatrix v = uniform_matrix(rng, m, c, magnitude);
  return AttentionProblem(std::move(q), std::move(k), std::move(v), grid);
}

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* env = std::getenv("ELFATT_SEED");
  if (env == nullptr) return fallback;
  std::uint64_t v = 0;
  const std::string_view s(env);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return fallback;
  return v;
}

std::size_t BlockSpec::blocks_for(std::size_t m) const {
  if (value == 0) throw ConfigError("block length/count must be positive");
  if (m % value != 0) {
    throw DivisibilityError(
        std::string(kind == Kind::FixedLength ? "block length " : "block count ") +
        std::to_string(value) + " does not divide sequence length " +
        std::to_string(m));
  }
  return kind == Kind::FixedLength ? m / value : value;
}

const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> modes = {"effatt", "elfatt", "local",
                                                 "performer", "vanilla"};
  return modes;
}

void SweepPlan::validate() const {
  if (lengths.size() < 4) {
    throw ConfigError("a sweep needs at least 4 sequence lengths");
  }
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] <= lengths[i - 1]) {
      throw ConfigError("sequence lengths must be strictly ascending");
    }
  }
  if (c < 2) throw ConfigError("channel width must be at least 2");
  if (modes.empty()) throw ConfigError("no modes requested");
  for (const auto& mode : modes) {
    if (std::find(known_modes().begin(), known_modes().end(), mode) ==
        known_modes().end()) {
      throw ConfigError("unknown mode '" + mode + "'");
    }
  }
  if (repeats < 3) throw ConfigError("repeats must be at least 3");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!(magnitude > 0.0)) throw ConfigError("magnitude must be positive");
  for (std::size_t m : lengths) (void)blocks.blocks_for(m);
}

std::vector<BenchRecord> run_sweep(const SweepPlan& plan) {
  plan.validate();
  set_num_threads(plan.threads);
  const AttentionMode attn_mode =
      plan.normalized ? AttentionMode::normalized() : AttentionMode::raw_exp();
  const std::size_t features =
      plan.performer_features.value_or(RandomFeatureMap::default_feature_count(plan.c));
  const auto fm = RandomFeatureMap::sample(plan.c, features, plan.seed);

  std::vector<std::string> modes = plan.modes;
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  const bool want_vanilla_ref =
      plan.timing ? std::find(modes.begin(), modes.end(), "vanilla") != modes.end()
                  : true;

  std::vector<BenchRecord> records;
  for (std::size_t m : plan.lengths) {
    const AttentionProblem p = generate_problem(m, plan.c, plan.seed, plan.magnitude);
    const std::size_t b = plan.blocks.blocks_for(m);
    const HeadSplitConfig cfg{plan.c / 2, plan.c - plan.c / 2, b};
    std::optional<DenseMatrix> reference;
    if (want_vanilla_ref && m <= plan.vanilla_cap) {
      reference = vanilla_attention(p, attn_mode);
    }

    for (const auto& mode : modes) {
      if (mode == "vanilla" && m > plan.vanilla_cap) continue;
      std::function<DenseMatrix()> forward;
      if (mode == "vanilla") {
        forward = [&] { return vanilla_attention(p, attn_mode); };
      } else if (mode == "elfatt") {
        forward = [&] { return elfatt_forward(p, cfg, attn_mode); };
      } else if (mode == "effatt") {
        forward = [&] { return effatt_attention(p, attn_mode); };
      } else if (mode == "performer") {
        forward = [&] { return performer_attention(p, fm, attn_mode); };
      } else {
        forward = [&] { return block_sparse_head(p, b, attn_mode); };
      }

      BenchRecord rec;
      rec.mode = plan.threads > 1 ? mode + "@" + std::to_string(plan.threads) + "t"
                                  : mode;
      rec.m = m;
      rec.c = plan.c;
      rec.c1 = cfg.c1;
      rec.c2 = cfg.c2;
      rec.b = b;
      rec.seed = plan.seed;
      rec.flops_est = mode_flops(mode, m, plan.c, cfg, features);

      std::optional<DenseMatrix> out;
      {
        AllocationProbe probe;
        out = forward();
        const std::size_t limit = footprint_limit(mode, m, plan.c, b, features);
        if (limit > 0 && probe.peak_entries() > limit) {
          throw Error(mode + " allocated a " + std::to_string(probe.peak_entries()) +
                      "-entry intermediate at m=" + std::to_string(m) +
                      " (limit " + std::to_string(limit) + ")");
        }
      }
      if (reference) rec.rel_err = relative_error(*reference, *out, NormKind::Frobenius);

      if (plan.timing) {
        for (std::size_t i = 0; i < plan.warmups; ++i) out = forward();
        std::vector<std::int64_t> samples;
        for (std::size_t i = 0; i < plan.repeats; ++i) {
          const auto t0 = std::chrono::steady_clock::now();
          out = forward();
          const auto t1 = std::chrono::steady_clock::now();
          samples.push_back(
              std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
        }
        rec.repeats = plan.repeats;
        rec.runtime_ns = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::llround(median_ns(samples))));
      } else {
        rec.repeats = 1;
      }
      records.push_back(std::move(rec));
    }
  }
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.mode != b.mode ? a.mode < b.mode : a.m < b.m;
  });
  return records;
}

double fit_loglog_slope(const std::vector<BenchRecord>& records) {
  if (records.empty()) throw InsufficientDataError("slope fit needs records");
  std::set<std::size_t> distinct;
  for (const auto& r : records) {
    if (r.mode != records.front().mode) {
      throw ConfigError("slope fit mixes modes '" + records.front().mode +
                        "' and '" + r.mode + "'");
    }
    if (!r.runtime_ns || *r.runtime_ns <= 0) {
      throw InsufficientDataError("slope fit needs positive runtimes");
    }
    distinct.insert(r.m);
  }
  if (distinct.size() < 4) {
    throw InsufficientDataError("slope fit needs at least 4 distinct lengths, got " +
                                std::to_string(distinct.size()));
  }
  double sx = 0, sy = 0;
  const auto n = static_cast<double>(records.size());
  for (const auto& r : records) {
    sx += std::log(static_cast<double>(r.m));
    sy += std::log(static_cast<double>(*r.runtime_ns));
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (const auto& r : records) {
    const double dx = std::log(static_cast<double>(r.m)) - mx;
    sxy += dx * (std::log(static_cast<double>(*r.runtime_ns)) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string emit_csv(std::vector<BenchRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.mode != b.mode ? a.mode < b.mode : a.m < b.m;
  });
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.mode + ',' + std::to_string(r.m) + ',' + std::to_string(r.c) + ',' +
           std::to_string(r.c1) + ',' + std::to_string(r.c2) + ',' +
           std::to_string(r.b) + ',' + std::to_string(r.repeats) + ',' +
           (r.runtime_ns ? std::to_string(*r.runtime_ns) : std::string()) + ',' +
           std::to_string(r.flops_est) + ',' +
           (r.rel_err ? format_double(*r.rel_err) : std::string()) + ',' +
           std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<BenchRecord> parse_sweep_csv(std::string_view text) {
  std::vector<BenchRecord> out;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = text.substr(start, pos - start);
    start = pos + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kSweepCsvHeader) throw IoError("sweep CSV: unexpected header");
      header = false;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 11) throw IoError("sweep CSV: expected 11 fields");
    BenchRecord r;
    r.mode = std::string(f[0]);
    r.m = parse_int<std::size_t>(f[1], "m");
    r.c = parse_int<std::size_t>(f[2], "c");
    r.c1 = parse_int<std::size_t>(f[3], "c1");
    r.c2 = parse_int<std::size_t>(f[4], "c2");
    r.b = parse_int<std::size_t>(f[5], "b");
    r.repeats = parse_int<std::size_t>(f[6], "repeats");
    if (!f[7].empty()) r.runtime_ns = parse_int<std::int64_t>(f[7], "runtime_ns");
    r.flops_est = parse_int<std::uint64_t>(f[8], "flops_est");
    if (!f[9].empty()) r.rel_err = parse_double(f[9]);
    r.seed = parse_int<std::uint64_t>(f[10], "seed");
    out.push_back(std::move(r));
  }
  if (header) throw IoError("sweep CSV: missing header");
  return out;
}

std::string emit_scaling_plot(const std::vector<BenchRecord>& records) {
  const bool use_runtime = !records.empty() &&
                           std::all_of(records.begin(), records.end(),
                                       [](const auto& r) { return r.runtime_ns.has_value(); });
  auto y_of = [&](const BenchRecord& r) {
    return use_runtime ? static_cast<double>(*r.runtime_ns)
                       : static_cast<double>(std::max<std::uint64_t>(r.flops_est, 1));
  };
  std::map<std::string, std::vector<const BenchRecord*>> series;
  for (const auto& r : records) series[r.mode].push_back(&r);
  for (auto& [mode, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->m < b->m; });
  }

  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 150, kTop = 30,
                   kBottom = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& r : records) {
    const double x = std::log10(static_cast<double>(std::max<std::size_t>(r.m, 1)));
    const double y = std::log10(y_of(r));
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (records.empty()) xmin = ymin = 0, xmax = ymax = 1;
  if (xmax - xmin < 1e-9) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
      << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
      << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\">log10(sequence length m)</text>\n"
      << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">"
      << (use_runtime ? "log10(median runtime ns)" : "log10(estimated MACs)")
      << "</text>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"" << kTop + ph + 16 << "\">" << fixed(xmin)
      << "</text>\n"
      << "<text x=\"" << kLeft + pw << "\" y=\"" << kTop + ph + 16
      << "\" text-anchor=\"end\">" << fixed(xmax) << "</text>\n"
      << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + ph
      << "\" text-anchor=\"end\">" << fixed(ymin) << "</text>\n"
      << "<text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 10
      << "\" text-anchor=\"end\">" << fixed(ymax) << "</text>\n";

  std::size_t idx = 0;
  for (const auto& [mode, pts] : series) {
    const char* color = kColors[idx % std::size(kColors)];
    std::string points;
    for (const auto* r : pts) {
      const double x = px(std::log10(static_cast<double>(std::max<std::size_t>(r->m, 1))));
      const double y = py(std::log10(y_of(*r)));
      points += fixed(x) + "," + fixed(y) + " ";
      svg << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!points.empty()) points.pop_back();
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << points << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(idx) + 8;
    svg << "<line x1=\"" << kW - kRight + 12 << "\" y1=\"" << ly << "\" x2=\""
        << kW - kRight + 32 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kW - kRight + 38 << "\" y=\"" << ly + 4 << "\">"
        << xml_escape(mode) << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace elfatt
