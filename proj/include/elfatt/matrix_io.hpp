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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "elfatt/matrix.hpp"

namespace elfatt {

// ELF1 binary layout: "ELF1", rows (u64 LE), cols (u64 LE), then row-major
// IEEE-754 doubles, little endian.
void write_elf1(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_elf1(std::istream& in);

// CSV layout: first line "<rows>,<cols>", then one matrix row per line.
// Values use the shortest round-trip representation, so a write/read cycle
// is bit-exact.
std::string to_csv(const DenseMatrix& m);
DenseMatrix parse_csv(std::string_view text);

// Format on save is chosen by extension (".csv" -> CSV, anything else ->
// ELF1). On load the ELF1 magic is sniffed first.
void save_matrix(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_matrix(const std::filesystem::path& path);

// Shortest round-trip text for a double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace elfatt
