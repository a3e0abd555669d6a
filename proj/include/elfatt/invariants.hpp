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
#include <string>
#include <vector>

namespace elfatt {

struct InvariantResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct InvariantOptions {
  std::uint64_t seed = 0;
  // Seeded instances per bound configuration.
  std::size_t bound_instances = 10;
};

// Property checks across every module. Never throws on a violation; an
// unexpected exception inside one check marks that check failed.
std::vector<InvariantResult> run_invariant_suite(const InvariantOptions& options = {});

}  // namespace elfatt
