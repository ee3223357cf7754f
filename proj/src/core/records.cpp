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

#include "core/records.hpp"

namespace mooclet {

json AssignmentRecord::to_json() const {
  json j{{"assignment_id", assignment_id},
         {"learner_id", learner_id},
         {"mooclet_id", mooclet_id},
         {"version_id", version_id},
         {"policy_kind", policy_kind_name(policy_kind)},
         {"policy_revision", policy_revision},
         {"propensity", propensity},
         {"propensity_estimated", propensity_estimated},
         {"wave", wave},
         {"holdout", holdout},
         {"timestamp", timestamp},
         {"sequence_no", sequence_no},
         {"rng_seed_state", rng_seed_state}};
  j["subgroup"] = subgroup ? subgroup->to_json() : json();
  return j;
}

AssignmentRecord AssignmentRecord::from_json(const json& j) {
  AssignmentRecord r;
  r.assignment_id = j.at("assignment_id").get<std::string>();
  r.learner_id = j.at("learner_id").get<std::string>();
  r.mooclet_id = j.at("mooclet_id").get<std::string>();
  r.version_id = j.at("version_id").get<std::string>();
  r.policy_kind = policy_kind_from_name(j.at("policy_kind").get<std::string>());
  r.policy_revision = j.at("policy_revision").get<std::int64_t>();
  for (const auto& [id, w] : j.at("propensity").items()) {
    r.propensity[id] = w.get<double>();
  }
  r.propensity_estimated = j.value("propensity_estimated", false);
  if (j.contains("subgroup") && j.at("subgroup").is_object()) {
    SubgroupKey key;
    for (const auto& [var, val] : j.at("subgroup").items()) {
      key.parts.emplace_back(var, val.get<std::string>());
    }
    r.subgroup = std::move(key);
  }
  r.wave = j.value("wave", "");
  r.holdout = j.value("holdout", false);
  r.timestamp = j.value("timestamp", std::int64_t{0});
  r.sequence_no = j.value("sequence_no", std::int64_t{0});
  r.rng_seed_state = j.value("rng_seed_state", "");
  return r;
}

std::uint64_t AssignmentRecord::rng_draws_after() const {
  const auto pos = rng_seed_state.rfind(':');
  if (pos == std::string::npos) return 0;
  try {
    return std::stoull(rng_seed_state.substr(pos + 1));
  } catch (...) {
    return 0;
  }
}

}  // namespace mooclet
