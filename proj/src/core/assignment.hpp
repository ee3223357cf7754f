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

#ifndef MOOCLET_CORE_ASSIGNMENT_HPP
#define MOOCLET_CORE_ASSIGNMENT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/jsonio.hpp"
#include "core/rng.hpp"
#include "core/variable_store.hpp"

namespace mooclet {

// Assignment probabilities per version id.  Entries are >= the exploration
// floor used to build them and sum to 1 within 1e-9.
using WeightVector = std::map<std::string, double>;

inline constexpr double kWeightSumTolerance = 1e-9;

// Throws InvalidWeights unless weights are finite, non-negative and sum to 1.
void validate_weights(const WeightVector& weights);

// Posterior counters for one (subgroup, version) cell.  alpha/beta track the
// Beta posterior: alpha = alpha0 + successes, beta = beta0 + failures.
struct ArmState {
  std::string version_id;
  double successes = 0.0;
  std::int64_t trials = 0;
  double alpha = 1.0;
  double beta = 1.0;

  // reward is clamped to [0, 1]; fractional rewards add fractional counts.
  void add_reward(double reward);

  json to_json() const;
  static ArmState from_json(const json& j);
};

// Ordered (variable, category) pairs over the policy's declared subgroup
// variables.  A missing profile value maps to the reserved category UNKNOWN.
struct SubgroupKey {
  std::vector<std::pair<std::string, std::string>> parts;

  std::string serialize() const;  // "var=val|var=val", empty for the global cell
  json to_json() const;
  bool operator==(const SubgroupKey&) const = default;
};

inline constexpr const char* kUnknownCategory = "UNKNOWN";

SubgroupKey subgroup_from_profile(const std::vector<std::string>& subgroup_variables,
                                  const Profile& profile);

// Uniform draw over the versions, propensity exactly 1/n each.
// Throws NoVersions on an empty list.
std::pair<std::string, WeightVector> assign_uniform(const std::vector<std::string>& version_ids,
                                                    Rng& rng);

// rate_v = (successes_v + s0) / (trials_v + t0); raw_v = rate_v / sum(rate);
// weight_v = floor + (1 - n*floor) * raw_v.  Throws InvalidFloor when
// floor * n > 1.  When every smoothed rate is zero the weights fall back to
// uniform (zero-information case).
struct VersionCounts {
  std::string version_id;
  double successes = 0.0;
  std::int64_t trials = 0;
};

WeightVector compute_proportional_weights(const std::vector<VersionCounts>& counts,
                                          double floor, double s0, double t0);

// Inverse-CDF sample over versions in id order.  Propensity is the weight
// vector itself.  Throws InvalidWeights.
std::string assign_weighted(const WeightVector& weights, Rng& rng);

struct ThompsonResult {
  std::string version_id;
  WeightVector propensity;  // estimated, see below
};

// Samples theta_v ~ Beta(alpha_v, beta_v) per arm and picks the argmax (ties
// go to the lowest version id).  The propensity is estimated from
// `resamples` auxiliary posterior draws plus the deciding draw itself (which
// keeps the chosen arm's estimate strictly positive); callers must flag it as
// estimated.  Throws NoArms.
ThompsonResult thompson_select(const std::vector<ArmState>& arms, Rng& rng,
                               int resamples = 1000);

}  // namespace mooclet

#endif  // MOOCLET_CORE_ASSIGNMENT_HPP
