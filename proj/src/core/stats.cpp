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

#include "core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "core/error.hpp"
#include "core/special_functions.hpp"

namespace mooclet {

std::vector<RateRow> response_rates(const std::vector<OutcomeRow>& rows,
                                    const std::vector<std::string>& all_conditions) {
  struct Cell {
    double successes = 0.0;
    std::int64_t trials = 0;
  };
  std::map<std::string, std::map<std::string, Cell>> cells;  // group -> condition -> cell
  for (const auto& row : rows) {
    auto& cell = cells[row.group][row.condition];
    cell.trials += 1;
    if (row.has_reward) cell.successes += row.reward;
  }
  if (cells.empty() && !all_conditions.empty()) cells[""];  // still emit the empty cells
  for (auto& [group, by_condition] : cells) {
    for (const auto& cond : all_conditions) by_condition.try_emplace(cond);
  }

  std::vector<RateRow> out;
  for (const auto& [group, by_condition] : cells) {
    for (const auto& [condition, cell] : by_condition) {
      RateRow row;
      row.group = group;
      row.condition = condition;
      row.successes = cell.successes;
      row.trials = cell.trials;
      if (cell.trials > 0) {
        row.rate = cell.successes / static_cast<double>(cell.trials);
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

double ContingencyTable::total() const {
  double sum = 0.0;
  for (const auto& row : counts) {
    for (double v : row) sum += v;
  }
  return sum;
}

json ContingencyTable::to_json() const {
  return json{{"rows", row_labels}, {"cols", col_labels}, {"counts", counts}};
}

json TestResult::to_json() const {
  return json{{"statistic", statistic},
              {"df", df},
              {"p_value", p_value},
              {"low_expected_count", low_expected_count}};
}

TestResult chi_square_independence(const ContingencyTable& table) {
  const std::size_t r = table.counts.size();
  if (r < 2) fail(Errc::degenerate_table, "need at least two rows");
  const std::size_t c = table.counts.front().size();
  if (c < 2) fail(Errc::degenerate_table, "need at least two columns");
  for (const auto& row : table.counts) {
    if (row.size() != c) fail(Errc::invalid_argument, "ragged contingency table");
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(Errc::invalid_argument, "counts must be finite and non-negative");
      }
    }
  }

  std::vector<double> row_margin(r, 0.0);
  std::vector<double> col_margin(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      row_margin[i] += table.counts[i][j];
      col_margin[j] += table.counts[i][j];
      total += table.counts[i][j];
    }
  }
  for (double m : row_margin) {
    if (m == 0.0) fail(Errc::degenerate_table, "zero row margin");
  }
  for (double m : col_margin) {
    if (m == 0.0) fail(Errc::degenerate_table, "zero column margin");
  }

  TestResult result;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double expected = row_margin[i] * col_margin[j] / total;
      if (expected < 1.0) result.low_expected_count = true;
      const double diff = table.counts[i][j] - expected;
      result.statistic += diff * diff / expected;
    }
  }
  result.df = static_cast<std::int64_t>((r - 1) * (c - 1));
  result.p_value = chi_square_upper_tail(result.statistic, static_cast<double>(result.df));
  return result;
}

ContingencyTable outcome_table(const std::vector<OutcomeRow>& rows) {
  struct Cell {
    double success = 0.0;
    double failure = 0.0;
  };
  std::map<std::string, Cell> by_condition;
  for (const auto& row : rows) {
    auto& cell = by_condition[row.condition];
    if (row.has_reward && row.reward > 0.0) {
      cell.success += 1.0;
    } else {
      cell.failure += 1.0;
    }
  }

  ContingencyTable table;
  table.col_labels = {"responded", "no_response"};
  for (const auto& [condition, cell] : by_condition) {
    table.row_labels.push_back(condition);
    table.counts.push_back({cell.success, cell.failure});
  }
  return table;
}

json InteractionResult::to_json() const {
  json strata_json = json::array();
  for (const auto& s : strata) {
    strata_json.push_back(json{{"stratum", s.stratum},
                               {"table", s.table.to_json()},
                               {"test", s.test.to_json()},
                               {"best_condition", s.best_condition}});
  }
  return json{{"strata", strata_json},
              {"skipped", skipped},
              {"pooled", pooled.to_json()},
              {"heterogeneity", heterogeneity.to_json()}};
}

namespace {

bool table_is_testable(const ContingencyTable& table) {
  if (table.counts.size() < 2) return false;
  std::vector<double> col_margin(table.col_labels.size(), 0.0);
  for (const auto& row : table.counts) {
    double row_margin = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      row_margin += row[j];
      col_margin[j] += row[j];
    }
    if (row_margin == 0.0) return false;
  }
  for (double m : col_margin) {
    if (m == 0.0) return false;
  }
  return true;
}

std::string best_condition_of(const ContingencyTable& table) {
  std::string best;
  double best_rate = -1.0;
  for (std::size_t i = 0; i < table.row_labels.size(); ++i) {
    const double trials = table.counts[i][0] + table.counts[i][1];
    if (trials <= 0.0) continue;
    const double rate = table.counts[i][0] / trials;
    if (rate > best_rate) {
      best_rate = rate;
      best = table.row_labels[i];
    }
  }
  return best;
}

}  // namespace

InteractionResult interaction_scan(const std::vector<OutcomeRow>& rows) {
  std::map<std::string, std::vector<OutcomeRow>> by_stratum;
  for (const auto& row : rows) by_stratum[row.group].push_back(row);

  InteractionResult result;
  std::vector<OutcomeRow> pooled_rows;
  // Conditions must agree across strata for the decomposition to make sense;
  // use the union and let zero rows disqualify a stratum.
  std::set<std::string> conditions;
  for (const auto& row : rows) conditions.insert(row.condition);

  double stratum_stat_sum = 0.0;
  for (auto& [stratum, stratum_rows] : by_stratum) {
    ContingencyTable table = outcome_table(stratum_rows);
    if (!table_is_testable(table) || table.row_labels.size() != conditions.size()) {
      result.skipped.push_back(stratum);
      continue;
    }
    StratumReport report;
    report.stratum = stratum;
    report.test = chi_square_independence(table);
    report.best_condition = best_condition_of(table);
    report.table = std::move(table);
    stratum_stat_sum += report.test.statistic;
    result.strata.push_back(std::move(report));
    pooled_rows.insert(pooled_rows.end(), stratum_rows.begin(), stratum_rows.end());
  }

  if (result.strata.size() < 2) {
    fail(Errc::too_few_strata, "interaction scan needs at least two testable strata");
  }

  result.pooled = chi_square_independence(outcome_table(pooled_rows));

  TestResult het;
  // Margin confounding across strata can push the raw difference below zero;
  // clamp so the statistic stays a valid chi-square argument.
  het.statistic = std::max(0.0, stratum_stat_sum - result.pooled.statistic);
  const auto r = static_cast<std::int64_t>(conditions.size());
  const auto k = static_cast<std::int64_t>(result.strata.size());
  het.df = (r - 1) * 1 * (k - 1);  // c = 2 outcomes
  het.p_value = chi_square_upper_tail(het.statistic, static_cast<double>(het.df));
  result.heterogeneity = het;
  return result;
}

std::vector<IpwEstimate> ipw_mean(const std::vector<OutcomeRow>& rows, bool allow_estimated) {
  if (rows.empty()) fail(Errc::empty_input, "no rows to estimate from");
  for (const auto& row : rows) {
    if (row.propensity_estimated && !allow_estimated) {
      fail(Errc::estimated_propensity,
           "row carries an estimated propensity; pass allow_estimated to override");
    }
    if (!(row.propensity > 0.0)) {
      fail(Errc::zero_propensity, "row has a non-positive logged propensity");
    }
  }

  std::set<std::string> conditions;
  for (const auto& row : rows) conditions.insert(row.condition);

  const double n = static_cast<double>(rows.size());
  std::vector<IpwEstimate> out;
  for (const auto& condition : conditions) {
    IpwEstimate est;
    est.condition = condition;
    std::vector<double> z(rows.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.condition == condition) {
        est.n_chosen += 1;
        if (row.has_reward) z[i] = row.reward / row.propensity;
      }
    }
    double sum = 0.0;
    for (double v : z) sum += v;
    est.estimate = sum / n;
    if (rows.size() > 1) {
      double ss = 0.0;
      for (double v : z) ss += (v - est.estimate) * (v - est.estimate);
      est.std_error = std::sqrt(ss / (n * (n - 1.0)));
    }
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace mooclet
