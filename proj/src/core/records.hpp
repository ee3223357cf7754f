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

#ifndef MOOCLET_CORE_RECORDS_HPP
#define MOOCLET_CORE_RECORDS_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "core/assignment.hpp"
#include "core/jsonio.hpp"
#include "core/types.hpp"

namespace mooclet {

// The audit trail for one served assignment: who got which version under
// which policy state, with the full propensity vector.  Immutable once
// persisted; analysis relies on the logged propensities being the exact
// sampling distribution used (Thompson propensities are estimates and carry
// the propensity_estimated flag).
struct AssignmentRecord {
  std::string assignment_id;
  std::string learner_id;
  std::string mooclet_id;
  std::string version_id;
  PolicyKind policy_kind = PolicyKind::uniform_random;
  std::int64_t policy_revision = 0;
  WeightVector propensity;
  bool propensity_estimated = false;
  std::optional<SubgroupKey> subgroup;
  std::string wave;
  bool holdout = false;
  std::int64_t timestamp = 0;
  std::int64_t sequence_no = 0;
  // "<seed>:<draws before>:<draws after>" -- pins the mooclet's RNG stream
  // position around this decision, so replay restores the generator exactly.
  std::string rng_seed_state;

  json to_json() const;
  static AssignmentRecord from_json(const json& j);

  // Draw counter encoded at the end of rng_seed_state (0 if absent).
  std::uint64_t rng_draws_after() const;
};

}  // namespace mooclet

#endif  // MOOCLET_CORE_RECORDS_HPP
