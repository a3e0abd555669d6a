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

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "elfatt/error.hpp"
#include "elfatt/matrix_io.hpp"
#include "oracles.hpp"

using namespace elfatt;

namespace {

DenseMatrix awkward_values() {
  auto a = oracle::random_matrix(42, 6, 5, -1e6, 1e6);
  a(0, 0) = std::numeric_limits<double>::denorm_min();
  a(0, 1) = -0.0;
  a(1, 0) = std::numeric_limits<double>::max();
  a(1, 1) = std::numeric_limits<double>::lowest();
  a(2, 2) = 0.1;
  a(3, 3) = 1.0 / 3.0;
  return a;
}

bool bit_equal(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i]))
      return false;
  }
  return true;
}

}  // namespace

TEST(Elf1, LayoutIsMagicDimsThenLittleEndianDoubles) {
  std::stringstream s;
  write_elf1(s, DenseMatrix::from_rows({{1.5, -2.0}}));
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 4u + 8 + 8 + 16);
  EXPECT_EQ(bytes.substr(0, 4), "ELF1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[20 + i]);
  EXPECT_EQ(std::bit_cast<double>(bits), 1.5);
}

TEST(Elf1, RoundTripIsBitExact) {
  const auto a = awkward_values();
  std::stringstream s;
  write_elf1(s, a);
  EXPECT_TRUE(bit_equal(read_elf1(s), a));
}

TEST(Elf1, RejectsBadMagicAndTruncation) {
  std::stringstream bad("ELF2aaaaaaaabbbbbbbb");
  EXPECT_THROW(read_elf1(bad), IoError);
  std::stringstream s;
  write_elf1(s, DenseMatrix(2, 2));
  std::string t = s.str();
  t.pop_back();
  std::stringstream truncated(t);
  EXPECT_THROW(read_elf1(truncated), IoError);
}

TEST(Csv, HeaderAndRoundTrip) {
  const auto text = to_csv(DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(text.substr(0, text.find('\n')), "2,3");
  const auto a = awkward_values();
  EXPECT_TRUE(bit_equal(parse_csv(to_csv(a)), a));
}

TEST(Csv, RejectsMalformedInput) {
  EXPECT_THROW(parse_csv("2,2\n1,2\n3\n"), IoError);
  EXPECT_THROW(parse_csv("1,2\n1,x\n"), IoError);
  EXPECT_THROW(parse_csv("2,1\n1\n"), IoError);
  EXPECT_THROW(parse_csv(""), IoError);
}

TEST(MatrixFiles, FormatFollowsExtensionAndMagic) {
  const auto dir = std::filesystem::temp_directory_path() / "elfatt_io_test";
  std::filesystem::create_directories(dir);
  const auto a = awkward_values();
  save_matrix(dir / "a.csv", a);
  save_matrix(dir / "a.bin", a);
  std::ifstream csv(dir / "a.csv");
  std::string first;
  std::getline(csv, first);
  EXPECT_EQ(first, "6,5");
  EXPECT_TRUE(bit_equal(load_matrix(dir / "a.csv"), a));
  EXPECT_TRUE(bit_equal(load_matrix(dir / "a.bin"), a));
  EXPECT_THROW(load_matrix(dir / "missing.elf1"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(parse_double(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_THROW(parse_double("1.0abc"), IoError);
}
