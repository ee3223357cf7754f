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

#include "core/error.hpp"

namespace mooclet {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::empty_design: return "EmptyDesign";
    case Errc::empty_factor: return "EmptyFactor";
    case Errc::duplicate_variable: return "DuplicateVariable";
    case Errc::invalid_categories: return "InvalidCategories";
    case Errc::unknown_variable: return "UnknownVariable";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::non_monotonic_timestamp: return "NonMonotonicTimestamp";
    case Errc::empty_input: return "EmptyInput";
    case Errc::invalid_number: return "InvalidNumber";
    case Errc::dsl_syntax: return "SyntaxError";
    case Errc::invalid_policy: return "InvalidPolicy";
    case Errc::no_versions: return "NoVersions";
    case Errc::unknown_version: return "UnknownVersion";
    case Errc::invalid_floor: return "InvalidFloor";
    case Errc::invalid_weights: return "InvalidWeights";
    case Errc::unregistered_subgroup_variable: return "UnregisteredSubgroupVariable";
    case Errc::no_arms: return "NoArms";
    case Errc::duplicate_reward: return "DuplicateReward";
    case Errc::unknown_assignment: return "UnknownAssignment";
    case Errc::degenerate_table: return "DegenerateTable";
    case Errc::too_few_strata: return "TooFewStrata";
    case Errc::zero_propensity: return "ZeroPropensity";
    case Errc::estimated_propensity: return "EstimatedPropensity";
    case Errc::duplicate_name: return "DuplicateName";
    case Errc::unknown_mooclet: return "UnknownMooclet";
    case Errc::revision_conflict: return "RevisionConflict";
    case Errc::duplicate_request: return "DuplicateRequest";
    case Errc::io_error: return "IoError";
    case Errc::invalid_scenario: return "InvalidScenario";
  }
  return "Unknown";
}

}  // namespace mooclet
