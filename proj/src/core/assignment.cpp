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

#include "core/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mooclet {

void validate_weights(const WeightVector& weights) {
  if (weights.empty()) fail(Errc::invalid_weights, "weight vector is empty");
  double sum = 0.0;
  for (const auto& [id, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      fail(Errc::invalid_weights, "weight for '" + id + "' must be finite and >= 0");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    fail(Errc::invalid_weights, "weights sum to " + std::to_string(sum) + ", expected 1");
  }
}

void ArmState::add_reward(double reward) {
  reward = std::clamp(reward, 0.0, 1.0);
  trials += 1;
  successes += reward;
  alpha += reward;
  beta += 1.0 - reward;
}

json ArmState::to_json() const {
  return json{{"version_id", version_id},
              {"successes", successes},
              {"trials", trials},
              {"alpha", alpha},
              {"beta", beta}};
}

ArmState ArmState::from_json(const json& j) {
  ArmState s;
  s.version_id = j.at("version_id").get<std::string>();
  s.successes = j.at("successes").get<double>();
  s.trials = j.at("trials").get<std::int64_t>();
  s.alpha = j.at("alpha").get<double>();
  s.beta = j.at("beta").get<double>();
  return s;
}

std::string SubgroupKey::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += '|';
    out += parts[i].first;
    out += '=';
    out += parts[i].second;
  }
  return out;
}

json SubgroupKey::to_json() const {
  json out = json::object();
  for (const auto& [var, val] : parts) out[var] = val;
  return out;
}

SubgroupKey subgroup_from_profile(const std::vector<std::string>& subgroup_variables,
                                  const Profile& profile) {
  SubgroupKey key;
  key.parts.reserve(subgroup_variables.size());
  for (const auto& var : subgroup_variables) {
    auto it = profile.find(var);
    if (it == profile.end()) {
      key.parts.emplace_back(var, kUnknownCategory);
    } else if (it->second.is_number()) {
      // Numeric subgroup values are not expected (the schema check rejects
      // them at policy install); serialize defensively anyway.
      key.parts.emplace_back(var, std::to_string(it->second.num));
    } else {
      key.parts.emplace_back(var, it->second.text);
    }
  }
  return key;
}

std::pair<std::string, WeightVector> assign_uniform(const std::vector<std::string>& version_ids,
                                                    Rng& rng) {
  if (version_ids.empty()) fail(Errc::no_versions, "cannot assign from zero versions");
  const double p = 1.0 / static_cast<double>(version_ids.size());
  WeightVector propensity;
  for (const auto& id : version_ids) propensity[id] = p;
  const auto idx = rng.next_below(version_ids.size());
  // Draw by index in id order so the stream is independent of input order.
  auto it = propensity.begin();
  std::advance(it, static_cast<long>(idx));
  return {it->first, std::move(propensity)};
}

WeightVector compute_proportional_weights(const std::vector<VersionCounts>& counts,
                                          double floor, double s0, double t0) {
  if (counts.empty()) fail(Errc::no_versions, "cannot weight zero versions");
  const double n = static_cast<double>(counts.size());
  if (!(floor >= 0.0) || floor * n > 1.0 + kWeightSumTolerance) {
    fail(Errc::invalid_floor, "floor * n must be <= 1");
  }

  std::map<std::string, double> rates;
  double total = 0.0;
  for (const auto& c : counts) {
    if (c.trials < 0 || c.successes < 0.0 || c.successes > static_cast<double>(c.trials)) {
      fail(Errc::invalid_argument, "counts for '" + c.version_id + "' are inconsistent");
    }
    const double denom = static_cast<double>(c.trials) + t0;
    const double rate = denom > 0.0 ? (c.successes + s0) / denom : 0.0;
    rates[c.version_id] = rate;
    total += rate;
  }

  WeightVector weights;
  for (const auto& [id, rate] : rates) {
    const double raw = total > 0.0 ? rate / total : 1.0 / n;
    weights[id] = floor + (1.0 - n * floor) * raw;
  }
  return weights;
}

std::string assign_weighted(const WeightVector& weights, Rng& rng) {
  validate_weights(weights);
  const double u = rng.next_double();
  double cum = 0.0;
  const std::string* last = nullptr;
  for (const auto& [id, w] : weights) {
    cum += w;
    last = &id;
    if (u < cum) return id;
  }
  return *last;  // rounding leftover lands in the top bucket
}

ThompsonResult thompson_select(const std::vector<ArmState>& arms, Rng& rng, int resamples) {
  if (arms.empty()) fail(Errc::no_arms, "cannot select from zero arms");
  for (const auto& arm : arms) {
    if (!(arm.alpha > 0.0) || !(arm.beta > 0.0)) {
      fail(Errc::invalid_argument, "arm '" + arm.version_id + "' has a non-positive posterior");
    }
  }

  // Arms in version-id order; ties in the draw go to the lowest id.
  std::vector<const ArmState*> ordered;
  ordered.reserve(arms.size());
  for (const auto& arm : arms) ordered.push_back(&arm);
  std::sort(ordered.begin(), ordered.end(),
            [](const ArmState* a, const ArmState* b) { return a->version_id < b->version_id; });

  auto draw_argmax = [&]() {
    std::size_t best = 0;
    double best_theta = -1.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      const double theta = rng.beta(ordered[i]->alpha, ordered[i]->beta);
      if (theta > best_theta) {
        best_theta = theta;
        best = i;
      }
    }
    return best;
  };

  const std::size_t chosen = draw_argmax();

  std::vector<std::int64_t> tally(ordered.size(), 0);
  tally[chosen] += 1;  // the deciding draw counts, keeping propensity[chosen] > 0
  for (int r = 0; r < resamples; ++r) tally[draw_argmax()] += 1;

  const double total = static_cast<double>(resamples + 1);
  ThompsonResult result;
  result.version_id = ordered[chosen]->version_id;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    result.propensity[ordered[i]->version_id] = static_cast<double>(tally[i]) / total;
  }
  return result;
}

}  // namespace mooclet
