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

#ifndef MOOCLET_CORE_STATS_HPP
#define MOOCLET_CORE_STATS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/jsonio.hpp"

namespace mooclet {

// One assignment joined with its reward (missing reward counts as 0, a
// non-response).  `group` carries the stratum / group-by label, empty when
// ungrouped.
struct OutcomeRow {
  std::string group;
  std::string condition;
  double reward = 0.0;
  bool has_reward = false;
  double propensity = 0.0;        // logged probability of the chosen condition
  bool propensity_estimated = false;
};

struct RateRow {
  std::string group;
  std::string condition;
  double successes = 0.0;
  std::int64_t trials = 0;
  std::optional<double> rate;  // absent when trials == 0 (undefined, never 0)
};

// Per (group, condition) response rates.  `all_conditions`, when non-empty,
// forces a row for every condition in every observed group so empty cells are
// visible.
std::vector<RateRow> response_rates(const std::vector<OutcomeRow>& rows,
                                    const std::vector<std::string>& all_conditions = {});

struct ContingencyTable {
  std::vector<std::string> row_labels;  // conditions
  std::vector<std::string> col_labels;  // outcomes
  std::vector<std::vector<double>> counts;

  double total() const;
  json to_json() const;
};

struct TestResult {
  double statistic = 0.0;
  std::int64_t df = 0;
  double p_value = 1.0;
  bool low_expected_count = false;  // some expected cell < 1

  json to_json() const;
};

// Pearson chi-square test of independence; expected counts from the margins,
// df = (r-1)(c-1), p from the regularized upper incomplete gamma.
// Throws DegenerateTable on a zero row/column margin or a <2x2 table.
TestResult chi_square_independence(const ContingencyTable& table);

// Builds a condition x (responded, no_response) table from outcome rows,
// dropping conditions with zero trials.  Rewards > 0 count as responses.
ContingencyTable outcome_table(const std::vector<OutcomeRow>& rows);

struct StratumReport {
  std::string stratum;
  ContingencyTable table;
  TestResult test;
  std::string best_condition;  // highest response rate, ties to the first
};

struct InteractionResult {
  std::vector<StratumReport> strata;      // strata that entered the test
  std::vector<std::string> skipped;       // strata without a testable table
  TestResult pooled;
  TestResult heterogeneity;               // sum of stratum chi2 minus pooled chi2

  json to_json() const;
};

// Stratifies rows by `group`, tests each stratum, and compares the summed
// stratum statistics against the pooled table: a large difference means the
// condition effect varies across strata.  The raw difference is clamped at
// zero (it is negative only in margin-confounded corner cases), with
// df = (r-1)(c-1)(k-1).  Throws TooFewStrata when fewer than two strata
// yield testable tables.
InteractionResult interaction_scan(const std::vector<OutcomeRow>& rows);

struct IpwEstimate {
  std::string condition;
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n_chosen = 0;
};

// Horvitz-Thompson per-condition value estimates over all N rows:
// estimate_c = (1/N) * sum_{i chose c} reward_i / propensity_i, with the
// plug-in standard error of the mean.  Refuses estimated propensities unless
// `allow_estimated` (EstimatedPropensity) and any propensity <= 0
// (ZeroPropensity).
std::vector<IpwEstimate> ipw_mean(const std::vector<OutcomeRow>& rows,
                                  bool allow_estimated = false);

}  // namespace mooclet

#endif  // MOOCLET_CORE_STATS_HPP
