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

#include "elfatt/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "elfatt/bench.hpp"
#include "elfatt/bounds.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/error.hpp"
#include "elfatt/invariants.hpp"
#include "elfatt/kernel_approx.hpp"
#include "elfatt/matrix_io.hpp"
#include "elfatt/parallel.hpp"

namespace elfatt {
namespace {

using Json = nlohmann::ordered_json;

Grid parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ConfigError("grid must look like HxW, got '" + text + "'");
  Grid g;
  auto parse = [&](std::string_view s, std::size_t& dst) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), dst);
    if (ec != std::errc{} || p != s.data() + s.size() || dst == 0) {
      throw ConfigError("grid must look like HxW, got '" + text + "'");
    }
  };
  parse(std::string_view(text).substr(0, x), g.height);
  parse(std::string_view(text).substr(x + 1), g.width);
  return g;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

Json report_json(const BoundReport& r) {
  Json j;
  j["norm"] = to_string(r.norm_kind);
  j["measured_error"] = r.measured_error;
  j["bound_value"] = r.bound_value;
  j["tolerance"] = r.tolerance;
  j["holds"] = r.holds();
  if (r.branch) j["branch"] = to_string(*r.branch);
  for (const auto& t : r.component_terms) j["term." + t.name] = t.value;
  for (const auto& t : r.diagnostics) j["diag." + t.name] = t.value;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

// ---- attn -----------------------------------------------------------------

struct AttnArgs {
  std::string q, k, v, out;
  std::string mode = "elfatt";
  std::optional<std::size_t> c1, c2, blocks;
  bool normalized = false;
  std::optional<double> scale;
  std::string lepe, lepe_scope = "per-block", grid;
  std::optional<std::size_t> features;
  std::uint64_t seed = 0;
};

int run_attn(const AttnArgs& a, std::ostream& out) {
  std::optional<Grid> grid;
  if (!a.grid.empty()) grid = parse_grid(a.grid);
  const AttentionProblem p(load_matrix(a.q), load_matrix(a.k), load_matrix(a.v), grid);
  const AttentionMode mode = (a.normalized || a.scale) ? AttentionMode::normalized(a.scale)
                                                        : AttentionMode::raw_exp();
  const std::size_t m = p.m(), c = p.c();
  std::size_t b = a.blocks.value_or(m % 64 == 0 ? m / 64 : 1);

  std::optional<DepthwiseKernel> kernel;
  if (!a.lepe.empty()) {
    if (a.lepe == "delta") kernel = DepthwiseKernel::delta(c);
    else if (a.lepe == "zero") kernel = DepthwiseKernel::zeros(c);
    else kernel = DepthwiseKernel::from_matrix(load_matrix(a.lepe));
  }
  const LepeScope scope = a.lepe_scope == "full-grid" ? LepeScope::FullGrid
                                                      : LepeScope::PerBlock;

  std::optional<DenseMatrix> result;
  if (a.mode == "vanilla") {
    result = vanilla_attention(p, mode);
  } else if (a.mode == "elfatt") {
    HeadSplitConfig cfg;
    cfg.c1 = a.c1.value_or(a.c2 ? c - std::min(*a.c2, c) : c / 2);
    cfg.c2 = a.c2.value_or(c - cfg.c1);
    cfg.b = b;
    result = elfatt_forward(p, cfg, mode, kernel, scope);
  } else if (a.mode == "effatt") {
    result = effatt_attention(p, mode);
  } else if (a.mode == "performer") {
    const auto fm = RandomFeatureMap::sample(
        c, a.features.value_or(RandomFeatureMap::default_feature_count(c)), a.seed);
    result = performer_attention(p, fm, mode);
  } else {
    result = block_sparse_head(p, b, mode);
  }
  if (a.out.empty()) out << to_csv(*result);
  else save_matrix(a.out, *result);
  return kExitOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string plan_file;
  std::vector<std::size_t> lengths;
  std::optional<std::size_t> block_len, block_count, c, threads, repeats, warmups,
      vanilla_cap, features;
  std::vector<std::string> modes;
  std::optional<std::uint64_t> seed;
  std::optional<double> magnitude;
  bool raw = false, no_timing = false;
  std::string csv, svg;
};

SweepPlan plan_from_json(const std::string& text) {
  SweepPlan plan;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
  try {
    if (j.contains("lengths")) plan.lengths = j["lengths"].get<std::vector<std::size_t>>();
    if (j.contains("block_len")) plan.blocks = {BlockSpec::Kind::FixedLength, j["block_len"]};
    if (j.contains("block_count")) plan.blocks = {BlockSpec::Kind::FixedCount, j["block_count"]};
    if (j.contains("c")) plan.c = j["c"];
    if (j.contains("modes")) plan.modes = j["modes"].get<std::vector<std::string>>();
    if (j.contains("threads")) plan.threads = j["threads"];
    if (j.contains("repeats")) plan.repeats = j["repeats"];
    if (j.contains("warmups")) plan.warmups = j["warmups"];
    if (j.contains("vanilla_cap")) plan.vanilla_cap = j["vanilla_cap"];
    if (j.contains("seed")) plan.seed = j["seed"];
    if (j.contains("magnitude")) plan.magnitude = j["magnitude"];
    if (j.contains("normalized")) plan.normalized = j["normalized"];
    if (j.contains("timing")) plan.timing = j["timing"];
    if (j.contains("features")) plan.performer_features = j["features"].get<std::size_t>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
  return plan;
}

int run_bench(const BenchArgs& a, std::ostream& out) {
  SweepPlan plan = a.plan_file.empty() ? SweepPlan{} : plan_from_json(read_file(a.plan_file));
  if (a.plan_file.empty()) {
    plan.lengths = {256, 512, 1024, 2048, 4096};
    plan.seed = default_seed();
  }
  if (a.block_len && a.block_count) {
    throw ConfigError("--block-len and --block-count are mutually exclusive");
  }
  if (!a.lengths.empty()) plan.lengths = a.lengths;
  if (a.block_len) plan.blocks = {BlockSpec::Kind::FixedLength, *a.block_len};
  if (a.block_count) plan.blocks = {BlockSpec::Kind::FixedCount, *a.block_count};
  if (a.c) plan.c = *a.c;
  if (!a.modes.empty()) plan.modes = a.modes;
  if (a.threads) plan.threads = static_cast<int>(*a.threads);
  if (a.repeats) plan.repeats = *a.repeats;
  if (a.warmups) plan.warmups = *a.warmups;
  if (a.vanilla_cap) plan.vanilla_cap = *a.vanilla_cap;
  if (a.features) plan.performer_features = *a.features;
  if (a.seed) plan.seed = *a.seed;
  if (a.magnitude) plan.magnitude = *a.magnitude;
  if (a.raw) plan.normalized = false;
  if (a.no_timing) plan.timing = false;

  const auto records = run_sweep(plan);
  const std::string csv = emit_csv(records);
  if (a.csv.empty()) out << csv;
  else write_file(a.csv, csv);
  if (!a.svg.empty()) write_file(a.svg, emit_scaling_plot(records));
  return kExitOk;
}

// ---- bounds ---------------------------------------------------------------

struct BoundsArgs {
  std::optional<std::uint64_t> seed;
  std::size_t m = 16, c1 = 2, c2 = 2, blocks = 2;
  double magnitude = 0.5;
  std::string norm = "frobenius";
  std::string q, k, v;
};

int run_bounds(const BoundsArgs& a, std::ostream& out) {
  const NormKind kind = parse_norm_kind(a.norm);
  Json j;
  std::optional<AttentionProblem> p;
  if (!a.q.empty() || !a.k.empty() || !a.v.empty()) {
    if (a.q.empty() || a.k.empty() || a.v.empty()) {
      throw ConfigError("--q, --k and --v must be given together");
    }
    p.emplace(load_matrix(a.q), load_matrix(a.k), load_matrix(a.v));
    j["source"] = "files";
  } else {
    const std::uint64_t seed = a.seed.value_or(default_seed());
    p.emplace(generate_problem(a.m, a.c1 + a.c2, seed, a.magnitude));
    j["source"] = "seeded";
    j["seed"] = seed;
    j["magnitude"] = a.magnitude;
  }
  HeadSplitConfig cfg{a.c1, a.c2, a.blocks};
  if (j["source"] == "files" && a.c1 + a.c2 != p->c()) {
    cfg.c1 = p->c() / 2;
    cfg.c2 = p->c() - cfg.c1;
  }
  cfg.validate(*p);
  j["m"] = p->m();
  j["c1"] = cfg.c1;
  j["c2"] = cfg.c2;
  j["b"] = cfg.b;
  j["norm"] = to_string(kind);

  const auto split = split_channels(*p, cfg);
  if (!split.barred || !split.tilded) throw ConfigError("bounds need c1 >= 1 and c2 >= 1");
  const auto stats = corollary1_stats(split.barred->q(), split.barred->k());
  j["statistics"] = Json{{"big_m", stats.big_m},
                         {"small_m", stats.small_m},
                         {"ratio_lower", stats.ratio_lower()},
                         {"ratio_upper", stats.ratio_upper()}};
  const BoundReport reports[] = {
      theorem1_bound(split.barred->q(), split.barred->k(), split.tilded->q(),
                     split.tilded->k(), kind),
      total_bound_single_head(*p, cfg, kind),
      total_bound_double_head(*p, cfg, kind),
      effatt_decomposition_bound(*p, cfg, kind),
      elfatt_decomposition_bound(*p, cfg, kind),
      local_decomposition_bound(*p, cfg, kind)};
  bool all_hold = true;
  for (const auto& r : reports) {
    j[r.name] = report_json(r);
    all_hold = all_hold && r.holds();
  }
  out << j.dump(2) << '\n';
  return all_hold ? kExitOk : kExitFailure;
}

// ---- check / gen ----------------------------------------------------------

int run_check(std::uint64_t seed, std::size_t instances, std::ostream& out) {
  InvariantOptions opts;
  opts.seed = seed;
  opts.bound_instances = instances;
  const auto results = run_invariant_suite(opts);
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) out << (r.passed ? " (" : ": ") << r.detail
                               << (r.passed ? ")" : "");
    if (!r.passed) ++failed;
    out << '\n';
  }
  out << results.size() - failed << '/' << results.size() << " invariants hold\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

struct GenArgs {
  std::size_t m = 16, c = 4;
  std::optional<std::uint64_t> seed;
  double magnitude = 0.5;
  std::string prefix = "problem";
  std::string format = "elf1";
};

int run_gen(const GenArgs& a, std::ostream& out) {
  const auto p = generate_problem(a.m, a.c, a.seed.value_or(default_seed()), a.magnitude);
  const std::string ext = a.format == "csv" ? ".csv" : ".elf1";
  const std::pair<const char*, const DenseMatrix*> parts[] = {
      {"q", &p.q()}, {"k", &p.k()}, {"v", &p.v()}};
  for (const auto& [name, mat] : parts) {
    const std::string path = a.prefix + "_" + name + ext;
    save_matrix(path, *mat);
    out << path << '\n';
  }
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  CLI::App app{"ELFATT attention kernels, bounds and benchmarks", "elfatt"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  AttnArgs attn;
  auto* attn_cmd = app.add_subcommand("attn", "Run one attention variant on matrix files");
  attn_cmd->add_option("--q", attn.q, "Query matrix (ELF1 or CSV)")->required();
  attn_cmd->add_option("--k", attn.k, "Key matrix")->required();
  attn_cmd->add_option("--v", attn.v, "Value matrix")->required();
  attn_cmd->add_option("--mode", attn.mode)
      ->check(CLI::IsMember({"vanilla", "elfatt", "effatt", "performer", "local"}));
  attn_cmd->add_option("--c1", attn.c1, "Global-head channels");
  attn_cmd->add_option("--c2", attn.c2, "Sparse-head channels");
  attn_cmd->add_option("--blocks", attn.blocks, "Block count b");
  attn_cmd->add_flag("--normalized", attn.normalized, "Row-softmax form");
  attn_cmd->add_option("--scale", attn.scale, "Softmax scale (implies --normalized)");
  attn_cmd->add_option("--lepe", attn.lepe, "delta, zero, or a c x 9 kernel file");
  attn_cmd->add_option("--lepe-scope", attn.lepe_scope)
      ->check(CLI::IsMember({"per-block", "full-grid"}));
  attn_cmd->add_option("--grid", attn.grid, "Token grid HxW");
  attn_cmd->add_option("--features", attn.features, "Performer feature count");
  attn_cmd->add_option("--seed", attn.seed, "Performer feature seed");
  attn_cmd->add_option("--out", attn.out, "Output file; CSV on stdout when absent");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a scaling sweep");
  bench_cmd->add_option("--plan", bench.plan_file, "JSON sweep plan");
  bench_cmd
      ->add_option("--lengths", bench.lengths, "Sequence lengths, ascending (default 256..4096)")
      ->delimiter(',');
  bench_cmd->add_option("--block-len", bench.block_len, "Fixed block length (default 64)");
  bench_cmd->add_option("--block-count", bench.block_count, "Fixed block count b");
  bench_cmd->add_option("--c", bench.c, "Channels (default 64)");
  bench_cmd->add_option("--modes", bench.modes, "effatt,elfatt,local,performer,vanilla")
      ->delimiter(',');
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (default 1)");
  bench_cmd->add_option("--repeats", bench.repeats, "Timed runs per point, median kept (>= 3)");
  bench_cmd->add_option("--warmups", bench.warmups, "Untimed runs per point");
  bench_cmd->add_option("--vanilla-cap", bench.vanilla_cap, "Largest m for vanilla runs and rel_err");
  bench_cmd->add_option("--features", bench.features, "Performer feature count");
  bench_cmd->add_option("--seed", bench.seed, "Problem seed (default $ELFATT_SEED or 0)");
  bench_cmd->add_option("--magnitude", bench.magnitude, "Entries drawn from [-mag, mag]");
  bench_cmd->add_flag("--raw", bench.raw, "Time the unnormalized form");
  bench_cmd->add_flag("--no-timing", bench.no_timing,
                      "Skip timing; output is deterministic");
  bench_cmd->add_option("--csv", bench.csv, "CSV output file; stdout when absent");
  bench_cmd->add_option("--svg", bench.svg, "SVG plot output file");

  BoundsArgs bounds;
  auto* bounds_cmd = app.add_subcommand("bounds", "Emit bound reports as JSON");
  bounds_cmd->add_option("--seed", bounds.seed, "Problem seed (default $ELFATT_SEED or 0)");
  bounds_cmd->add_option("--m", bounds.m, "Sequence length");
  bounds_cmd->add_option("--c1", bounds.c1);
  bounds_cmd->add_option("--c2", bounds.c2);
  bounds_cmd->add_option("--blocks", bounds.blocks, "Block count b");
  bounds_cmd->add_option("--magnitude", bounds.magnitude, "Entries drawn from [-mag, mag]");
  bounds_cmd->add_option("--norm", bounds.norm)
      ->check(CLI::IsMember({"spectral", "frobenius", "2", "F", "fro"}));
  bounds_cmd->add_option("--q", bounds.q, "Use matrices from files instead");
  bounds_cmd->add_option("--k", bounds.k);
  bounds_cmd->add_option("--v", bounds.v);

  std::uint64_t check_seed = 0;
  std::size_t check_instances = 10;
  auto* check_cmd = app.add_subcommand("check", "Run the invariant suites");
  check_cmd->add_option("--seed", check_seed);
  check_cmd->add_option("--instances", check_instances,
                        "Seeded instances per bound configuration");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a seeded problem to files");
  gen_cmd->add_option("--m", gen.m);
  gen_cmd->add_option("--c", gen.c);
  gen_cmd->add_option("--seed", gen.seed, "Default $ELFATT_SEED or 0");
  gen_cmd->add_option("--magnitude", gen.magnitude);
  gen_cmd->add_option("--prefix", gen.prefix, "Writes <prefix>_{q,k,v}.<ext>");
  gen_cmd->add_option("--format", gen.format)->check(CLI::IsMember({"elf1", "csv"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (*attn_cmd) return run_attn(attn, out);
    if (*bench_cmd) return run_bench(bench, out);
    if (*bounds_cmd) return run_bounds(bounds, out);
    if (*check_cmd) return run_check(check_seed, check_instances, out);
    if (*gen_cmd) return run_gen(gen, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivisibilityError& e) {
    err << "divisibility error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace elfatt
