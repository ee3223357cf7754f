// Copyright 2026 the mooclet-engine authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MOOCLET_CORE_TYPES_HPP
#define MOOCLET_CORE_TYPES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "core/jsonio.hpp"

namespace mooclet {

// One concrete alternative rendering of a mooclet (an arm, in bandit terms).
// The payload is an opaque content blob; the engine routes it, never
// interprets it.
struct Version {
  std::string id;
  std::string label;
  json payload;  // may be null

  json to_json() const;
  static Version from_json(const json& j);
  bool operator==(const Version&) const = default;
};

enum class PolicyKind {
  uniform_random,
  weighted_random,
  rule_based,
  ts_contextual,
  proportional_contextual,
};

const char* policy_kind_name(PolicyKind kind);
PolicyKind policy_kind_from_name(const std::string& name);

// The active assignment procedure of a mooclet.  `config` is kind-specific
// and validated when installed; `revision` increments by exactly one on every
// policy update.
struct PolicyRef {
  PolicyKind kind = PolicyKind::uniform_random;
  json config = json::object();
  std::int64_t revision = 0;

  json to_json() const;
  static PolicyRef from_json(const json& j);
};

// A modular component with identified versions and one active policy.
struct Mooclet {
  std::string id;
  std::string name;
  std::vector<Version> versions;
  PolicyRef active_policy;
  std::int64_t created_at = 0;

  const Version* find_version(const std::string& version_id) const;
  bool has_version(const std::string& version_id) const {
    return find_version(version_id) != nullptr;
  }

  json to_json() const;
  static Mooclet from_json(const json& j);
};

// An experiment crossing several independent factors; every factor is a
// mooclet and every combination is one experimental cell.
struct FactorialDesign {
  std::string name;
  std::vector<Mooclet> factors;
};

// One cell of a factorial design: one version id per factor, in factor order.
using Combination = std::vector<std::string>;

// Full cross product of the design's versions, lexicographic in factor order
// (rightmost factor varies fastest).  Throws EmptyDesign / EmptyFactor.
std::vector<Combination> enumerate_combinations(const FactorialDesign& design);

// Synthetic composite id for logging one cell, e.g. "f1=v2|f2=v1|f3=v3".
std::string composite_cell_id(const FactorialDesign& design, const Combination& cell);

}  // namespace mooclet

#endif  // MOOCLET_CORE_TYPES_HPP
