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

#include "elfatt/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "elfatt/error.hpp"

namespace elfatt {
namespace {

constexpr std::array<char, 4> kMagic = {'E', 'L', 'F', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw IoError("ELF1: truncated header");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw IoError("CSV: bad dimension '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw IoError("cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

void write_elf1(std::ostream& out, const DenseMatrix& m) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("ELF1: write failed");
}

DenseMatrix read_elf1(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("ELF1: bad magic");
  }
  const auto rows = get_u64(in);
  const auto cols = get_u64(in);
  if (rows == 0 || cols == 0 ||
      rows > std::numeric_limits<std::uint32_t>::max() ||
      cols > std::numeric_limits<std::uint32_t>::max()) {
    throw IoError("ELF1: implausible shape " + std::to_string(rows) + "x" +
                  std::to_string(cols));
  }
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    std::uint64_t bits = 0;
    try {
      bits = get_u64(in);
    } catch (const IoError&) {
      throw IoError("ELF1: truncated payload");
    }
    v = std::bit_cast<double>(bits);
  }
  return DenseMatrix(rows, cols, std::move(data));
}

std::string to_csv(const DenseMatrix& m) {
  std::string out = std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0) out += ',';
      out += format_double(r[j]);
    }
    out += '\n';
  }
  return out;
}

DenseMatrix parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  if (lines.empty()) throw IoError("CSV: empty input");
  const auto header = split(lines.front(), ',');
  if (header.size() != 2) throw IoError("CSV: header must be 'rows,cols'");
  const std::size_t rows = parse_count(header[0]);
  const std::size_t cols = parse_count(header[1]);
  if (lines.size() - 1 != rows) {
    throw IoError("CSV: header declares " + std::to_string(rows) +
                  " rows but found " + std::to_string(lines.size() - 1));
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], ',');
    if (fields.size() != cols) {
      throw IoError("CSV: row " + std::to_string(i - 1) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(cols));
    }
    for (auto f : fields) data.push_back(parse_double(f));
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  if (path.extension() == ".csv") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_csv(m);
    if (!out) throw IoError("write failed: " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_elf1(out, m);
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  const bool is_elf1 = in.gcount() == 4 && magic == kMagic;
  in.clear();
  in.seekg(0);
  if (is_elf1) return read_elf1(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace elfatt
