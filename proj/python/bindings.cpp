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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>
#include <variant>

#include "elfatt/attention.hpp"
#include "elfatt/bounds.hpp"
#include "elfatt/elfatt.hpp"
#include "elfatt/error.hpp"
#include "elfatt/kernel_approx.hpp"
#include "elfatt/matrix.hpp"
#include "elfatt/matrix_io.hpp"

namespace py = pybind11;
using namespace elfatt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_dense(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return DenseMatrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const DenseMatrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

AttentionProblem problem(const Array& q, const Array& k, const Array& v,
                         std::optional<std::tuple<std::size_t, std::size_t>> grid = std::nullopt) {
  std::optional<Grid> g;
  if (grid) g = Grid{std::get<0>(*grid), std::get<1>(*grid)};
  return AttentionProblem(to_dense(q), to_dense(k), to_dense(v), g);
}

AttentionMode mode_for(bool normalized, std::optional<double> scale) {
  return normalized ? AttentionMode::normalized(scale) : AttentionMode::raw_exp();
}

py::dict report_dict(const BoundReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["measured_error"] = r.measured_error;
  d["bound_value"] = r.bound_value;
  d["tolerance"] = r.tolerance;
  d["holds"] = r.holds();
  d["branch"] = r.branch ? py::object(py::str(to_string(*r.branch))) : py::object(py::none());
  py::dict terms, diags;
  for (const auto& t : r.component_terms) terms[py::str(t.name)] = t.value;
  for (const auto& t : r.diagnostics) diags[py::str(t.name)] = t.value;
  d["terms"] = terms;
  d["diagnostics"] = diags;
  return d;
}

}  // namespace

PYBIND11_MODULE(_elfatt, m) {
  m.doc() = "ELFATT attention kernels";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<OverflowError>(m, "OverflowError", base);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base);
  py::register_exception<DivisibilityError>(m, "DivisibilityError", base);
  py::register_exception<DegeneracyError>(m, "DegeneracyError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base);
  py::register_exception<IoError>(m, "IoError", base);

  m.def(
      "vanilla_attention",
      [](const Array& q, const Array& k, const Array& v, bool normalized, std::optional<double> scale) {
        return to_array(vanilla_attention(problem(q, k, v), mode_for(normalized, scale)));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("normalized") = false,
      py::arg("scale") = py::none());

  m.def(
      "block_sparse_attention",
      [](const Array& q, const Array& k, const Array& v, std::size_t b, bool normalized,
         std::optional<double> scale) {
        return to_array(block_sparse_head(problem(q, k, v), b, mode_for(normalized, scale)));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("b"), py::arg("normalized") = false,
      py::arg("scale") = py::none());

  m.def(
      "effatt_attention",
      [](const Array& q, const Array& k, const Array& v, bool normalized, std::optional<double> scale) {
        return to_array(effatt_attention(problem(q, k, v), mode_for(normalized, scale)));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("normalized") = false,
      py::arg("scale") = py::none());

  m.def(
      "performer_attention",
      [](const Array& q, const Array& k, const Array& v, std::optional<std::size_t> features,
         std::uint64_t seed, bool normalized, std::optional<double> scale) {
        const auto p = problem(q, k, v);
        const auto fm = RandomFeatureMap::sample(
            p.c(), features.value_or(RandomFeatureMap::default_feature_count(p.c())), seed);
        return to_array(performer_attention(p, fm, mode_for(normalized, scale)));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("features") = py::none(), py::arg("seed") = 0,
      py::arg("normalized") = false, py::arg("scale") = py::none());

  m.def(
      "elfatt_attention",
      [](const Array& q, const Array& k, const Array& v, std::size_t c1, std::size_t c2, std::size_t b,
         bool normalized, std::optional<double> scale,
         std::optional<std::variant<std::string, Array>> lepe_kernel,
         std::optional<std::tuple<std::size_t, std::size_t>> grid, const std::string& lepe_scope) {
        const auto p = problem(q, k, v, grid);
        std::optional<DepthwiseKernel> kernel;
        if (lepe_kernel) {
          if (const auto* name = std::get_if<std::string>(&*lepe_kernel)) {
            if (*name == "delta") kernel = DepthwiseKernel::delta(p.c());
            else if (*name == "zero") kernel = DepthwiseKernel::zeros(p.c());
            else throw ConfigError("unknown LePE kernel '" + *name + "'");
          } else {
            kernel = DepthwiseKernel::from_matrix(to_dense(std::get<Array>(*lepe_kernel)));
          }
        }
        LepeScope scope;
        if (lepe_scope == "per-block") scope = LepeScope::PerBlock;
        else if (lepe_scope == "full-grid") scope = LepeScope::FullGrid;
        else throw ConfigError("lepe_scope must be per-block or full-grid");
        return to_array(elfatt_forward(p, {c1, c2, b}, mode_for(normalized, scale), kernel, scope));
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("c1"), py::arg("c2"), py::arg("b"),
      py::arg("normalized") = false, py::arg("scale") = py::none(), py::arg("lepe") = py::none(),
      py::arg("grid") = py::none(), py::arg("lepe_scope") = "per-block");

  m.def(
      "bounds",
      [](const Array& q, const Array& k, const Array& v, std::size_t c1, std::size_t c2, std::size_t b,
         const std::string& norm) {
        const auto p = problem(q, k, v);
        const HeadSplitConfig cfg{c1, c2, b};
        cfg.validate(p);
        const NormKind kind = parse_norm_kind(norm);
        const auto split = split_channels(p, cfg);
        py::list out;
        if (split.barred && split.tilded) {
          out.append(report_dict(theorem1_bound(split.barred->q(), split.barred->k(),
                                                split.tilded->q(), split.tilded->k(), kind)));
        }
        for (const auto& r : {total_bound_single_head(p, cfg, kind), total_bound_double_head(p, cfg, kind),
                              effatt_decomposition_bound(p, cfg, kind),
                              elfatt_decomposition_bound(p, cfg, kind),
                              local_decomposition_bound(p, cfg, kind)}) {
          out.append(report_dict(r));
        }
        return out;
      },
      py::arg("q"), py::arg("k"), py::arg("v"), py::arg("c1"), py::arg("c2"), py::arg("b"),
      py::arg("norm") = "frobenius");

  m.def(
      "flops_estimate",
      [](std::size_t m_, std::size_t c1, std::size_t c2, std::size_t b) {
        const auto f = flops_estimate(m_, {c1, c2, b});
        py::dict d;
        d["global_head"] = f.global_head;
        d["sparse_head"] = f.sparse_head;
        d["vanilla"] = f.vanilla;
        return d;
      },
      py::arg("m"), py::arg("c1"), py::arg("c2"), py::arg("b"));

  m.def(
      "norm", [](const Array& a, const std::string& kind) { return norm(to_dense(a), parse_norm_kind(kind)); },
      py::arg("a"), py::arg("kind") = "frobenius");

  m.def("load_matrix", [](const std::string& path) { return to_array(load_matrix(path)); }, py::arg("path"));
  m.def(
      "save_matrix", [](const std::string& path, const Array& a) { save_matrix(path, to_dense(a)); },
      py::arg("path"), py::arg("a"));
}
