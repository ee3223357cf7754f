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

#ifndef MOOCLET_CORE_SIM_HPP
#define MOOCLET_CORE_SIM_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/jsonio.hpp"
#include "core/records.hpp"

namespace mooclet::sim {

// Synthetic-population scenario.  JSON schema (see docs/scenario-schema.md):
//
// {
//   "name": "...", "seed": 1, "population": 5500,
//   "reward_mode": "wave_end" | "immediate",        // default wave_end
//   "outcome_variable": "responded",                 // default
//   "characteristics": [
//     {"name": "group", "categories": [...], "probs": [...]},
//     {"name": "age", "numeric": {"min": 18, "max": 62, "integer": true},
//      "bin_into": {"name": "age_group", "n_bins": 5}}
//   ],
//   "factors": [{"name": "message", "versions": ["v1","v2","v3"]}],
//   "response_model": {                              // optional; no rewards without it
//     "default": 0.1,
//     "cells": [{"when": {"factors": {"message": "v1"},
//                          "subgroup": {"group": "g1"}}, "prob": 0.3}, ...]
//   },                                               // ordered, first match wins
//   "waves": [{"size": 4000, "policy": {"kind": ..., "config": {...}}}, ...]
// }
struct Scenario {
  struct Characteristic {
    std::string name;
    // categorical
    std::vector<std::string> categories;
    std::vector<double> probs;
    // numeric
    bool is_numeric = false;
    double min = 0.0;
    double max = 0.0;
    bool integer_valued = false;
    // optional discretization of a numeric characteristic: either quantile
    // ({"name","n_bins"}) or explicit ({"name","boundaries","labels"})
    std::string bin_into_name;
    int bin_into_n = 0;
    std::vector<double> bin_boundaries;
    std::vector<std::string> bin_labels;
  };
  struct Factor {
    std::string name;
    std::vector<std::string> versions;
  };
  struct Cell {
    std::map<std::string, std::string> factor_versions;  // factor name -> version
    std::map<std::string, std::string> subgroup;         // characteristic -> category
    double prob = 0.0;
  };
  struct Wave {
    std::int64_t size = 0;
    json policy;  // {"kind", "config"}
  };

  std::string name;
  std::uint64_t seed = 0;
  std::int64_t population = 0;
  bool immediate_rewards = false;
  std::string outcome_variable = "responded";
  std::vector<Characteristic> characteristics;
  std::vector<Factor> factors;
  bool has_response_model = false;
  double default_prob = 0.0;
  std::vector<Cell> cells;
  std::vector<Wave> waves;

  // Throws InvalidScenario on structural problems.
  static Scenario parse(const json& j);

  // Ground truth for one learner/condition pair: first matching cell in
  // order, else the default.
  double response_prob(const std::map<std::string, std::string>& chosen,
                       const std::map<std::string, std::string>& learner_chars) const;

  // Contextual optimum: best response probability over all condition tuples
  // for this learner's characteristics.
  double best_prob(const std::map<std::string, std::string>& learner_chars) const;
};

struct RunResult {
  json report;
  // Per-assignment trail in engine log order, with realized rewards, for
  // oracles and acceptance checks.
  std::vector<AssignmentRecord> records;
  std::map<std::string, double> rewards;  // assignment id -> reward
  double final_regret = 0.0;
};

// Runs the scenario through a real in-memory engine: every assignment and
// reward flows through the same code paths the service uses.  Deterministic
// given the scenario seed.  When trace_path is set, writes one JSONL line per
// assignment: {"record": ..., "reward": <number|null>}.
RunResult run_scenario(const Scenario& scenario,
                       const std::optional<std::string>& trace_path = std::nullopt);

// Re-runs the scenario once per (policy, replication) with the candidate
// policy substituted into every wave after the first (or into the only wave),
// and reports mean/std cumulative and comparison-wave response rates, lift
// ratios against the first policy, and regret curves sampled every 100 steps.
// Replications run in parallel across `threads` workers; results are
// identical for any thread count.
json compare_policies(const Scenario& scenario, const std::vector<json>& policies,
                      int replications, int threads = 1);

}  // namespace mooclet::sim

#endif  // MOOCLET_CORE_SIM_HPP
