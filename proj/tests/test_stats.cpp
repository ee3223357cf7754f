#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "core/error.hpp"
#include "core/special_functions.hpp"
#include "core/stats.hpp"
#include "oracles.hpp"

using namespace mooclet;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::invalid_argument;
}

ContingencyTable table_of(std::vector<std::vector<double>> counts) {
  ContingencyTable t;
  for (std::size_t i = 0; i < counts.size(); ++i) t.row_labels.push_back("r" + std::to_string(i));
  for (std::size_t j = 0; j < counts.front().size(); ++j) t.col_labels.push_back("c" + std::to_string(j));
  t.counts = std::move(counts);
  return t;
}

OutcomeRow row(const std::string& group, const std::string& condition, double reward,
               bool has_reward = true, double propensity = 0.5, bool estimated = false) {
  OutcomeRow r;
  r.group = group;
  r.condition = condition;
  r.reward = reward;
  r.has_reward = has_reward;
  r.propensity = propensity;
  r.propensity_estimated = estimated;
  return r;
}

}  // namespace

TEST_CASE("chi-square: the [[10,90],[20,80]] table") {
  auto result = chi_square_independence(table_of({{10, 90}, {20, 80}}));
  CHECK(std::abs(result.statistic - 3.9216) < 1e-3);
  CHECK(result.df == 1);
  CHECK(std::abs(result.p_value - 0.0477) < 5e-4);
  CHECK_FALSE(result.low_expected_count);
}

TEST_CASE("chi-square: identical rows mean exact independence") {
  auto result = chi_square_independence(table_of({{25, 75}, {25, 75}, {25, 75}}));
  CHECK(result.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(result.p_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.df == 2);
}

TEST_CASE("chi-square: invariant under row and column permutation") {
  auto a = chi_square_independence(table_of({{12, 33, 5}, {21, 14, 9}}));
  auto b = chi_square_independence(table_of({{21, 14, 9}, {12, 33, 5}}));       // rows swapped
  auto c = chi_square_independence(table_of({{5, 33, 12}, {9, 14, 21}}));       // cols reversed
  CHECK(a.statistic == doctest::Approx(b.statistic).epsilon(1e-12));
  CHECK(a.statistic == doctest::Approx(c.statistic).epsilon(1e-12));
  CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
}

TEST_CASE("chi-square: degenerate margins are rejected, tiny cells get flagged") {
  CHECK(code_of([&] { chi_square_independence(table_of({{0, 0}, {5, 5}})); }) ==
        Errc::degenerate_table);
  CHECK(code_of([&] { chi_square_independence(table_of({{5, 0}, {5, 0}})); }) ==
        Errc::degenerate_table);
  auto flagged = chi_square_independence(table_of({{1, 40}, {1, 38}}));
  CHECK(flagged.low_expected_count);
}

TEST_CASE("chi-square: 100 random tables match the long-double direct formula to 1e-9") {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> counts(3, std::vector<double>(2));
    for (auto& r : counts) {
      for (auto& cell : r) cell = 1.0 + static_cast<double>(gen() % 400);
    }
    auto result = chi_square_independence(table_of(counts));
    const long double expected = oracles::chi_square_statistic(counts);
    CHECK(std::abs(result.statistic - static_cast<double>(expected)) < 1e-9);
  }
}

TEST_CASE("chi-square tail matches the closed-form gamma oracle to 1e-8") {
  for (int df : {1, 2, 3, 4, 5, 8, 12, 20, 40}) {
    for (double x : {0.0, 0.1, 0.5, 1.0, 1.9608, 3.9216, 7.5, 15.0, 30.0, 80.0}) {
      const double mine = chi_square_upper_tail(x, df);
      const long double oracle = oracles::chi_square_tail(x, df);
      CAPTURE(df);
      CAPTURE(x);
      CHECK(std::abs(mine - static_cast<double>(oracle)) < 1e-8);
    }
  }
  // edges: Q(a, 0) = 1, monotone decreasing in the statistic
  CHECK(chi_square_upper_tail(0.0, 4) == 1.0);
  double prev = 1.0;
  for (double x = 0.5; x < 40; x += 0.5) {
    const double q = chi_square_upper_tail(x, 4);
    CHECK(q <= prev);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
    prev = q;
  }
}

TEST_CASE("regularized incomplete gamma basics") {
  CHECK(reg_lower_gamma(2.0, 0.0) == 0.0);
  CHECK(reg_upper_gamma(2.0, 0.0) == 1.0);
  CHECK(reg_lower_gamma(2.0, 1.0) + reg_upper_gamma(2.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  // known value: P(2, 1) = 1 - 2/e
  CHECK(reg_lower_gamma(2.0, 1.0) == doctest::Approx(1.0 - 2.0 / std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("response rates: counting, empty cells and the recount oracle") {
  std::vector<OutcomeRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back(row("", "v1", i < 3 ? 1.0 : 0.0));
  auto rates = response_rates(rows, {"v1", "v2"});
  REQUIRE(rates.size() == 2);
  CHECK(rates[0].condition == "v1");
  CHECK(rates[0].successes == 3.0);
  CHECK(rates[0].trials == 10);
  CHECK(*rates[0].rate == doctest::Approx(0.3));
  // zero-assignment condition: undefined rate, never 0
  CHECK(rates[1].condition == "v2");
  CHECK(rates[1].trials == 0);
  CHECK_FALSE(rates[1].rate.has_value());

  // recount oracle over a synthetic log
  std::mt19937_64 gen(9);
  std::vector<OutcomeRow> log;
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> recount;
  for (int i = 0; i < 1000; ++i) {
    const std::string g = "g" + std::to_string(gen() % 3);
    const std::string c = "v" + std::to_string(1 + gen() % 3);
    const double r = (gen() % 4 == 0) ? 1.0 : 0.0;
    log.push_back(row(g, c, r));
    auto& acc = recount[{g, c}];
    acc.first += r;
    acc.second += 1;
  }
  for (const auto& rr : response_rates(log)) {
    const auto& acc = recount.at({rr.group, rr.condition});
    CHECK(rr.successes == acc.first);
    CHECK(rr.trials == acc.second);
    CHECK(*rr.rate == doctest::Approx(acc.first / acc.second));
  }
}

TEST_CASE("interaction scan: swapped best arms across two strata") {
  // ground truth: stratum A favors v1 (0.3 vs 0.1), stratum B the reverse
  std::mt19937_64 gen(77);
  std::vector<OutcomeRow> rows;
  auto bern = [&](double p) { return (gen() >> 11) * 0x1.0p-53 < p ? 1.0 : 0.0; };
  for (int i = 0; i < 500; ++i) {
    rows.push_back(row("A", i % 2 ? "v1" : "v2", bern(i % 2 ? 0.3 : 0.1)));
    rows.push_back(row("B", i % 2 ? "v1" : "v2", bern(i % 2 ? 0.1 : 0.3)));
  }
  auto result = interaction_scan(rows);
  REQUIRE(result.strata.size() == 2);
  CHECK(result.heterogeneity.p_value < 0.01);
  CHECK(result.heterogeneity.statistic >= 0.0);
  CHECK(result.strata[0].best_condition == "v1");
  CHECK(result.strata[1].best_condition == "v2");
  CHECK(result.heterogeneity.df == 1);
}

TEST_CASE("interaction scan: null calibration stays near the nominal level") {
  // identical condition effects in every stratum: rejections at 5% should be
  // close to 5% across repeated simulations
  std::mt19937_64 gen(2026);
  auto bern = [&](double p) { return (gen() >> 11) * 0x1.0p-53 < p ? 1.0 : 0.0; };
  int rejections = 0;
  const int sims = 1000;
  for (int s = 0; s < sims; ++s) {
    std::vector<OutcomeRow> rows;
    for (int stratum = 0; stratum < 3; ++stratum) {
      for (int i = 0; i < 300; ++i) {
        const std::string condition = "v" + std::to_string(1 + i % 3);
        rows.push_back(row("s" + std::to_string(stratum), condition,
                           bern(condition == "v1" ? 0.25 : 0.15)));
      }
    }
    auto result = interaction_scan(rows);
    if (result.heterogeneity.p_value < 0.05) ++rejections;
  }
  const double rate = rejections / static_cast<double>(sims);
  CHECK(rate > 0.03);
  CHECK(rate < 0.07);
}

TEST_CASE("interaction scan: needs two testable strata") {
  std::vector<OutcomeRow> rows;
  for (int i = 0; i < 50; ++i) rows.push_back(row("only", i % 2 ? "v1" : "v2", i % 3 == 0));
  CHECK(code_of([&] { interaction_scan(rows); }) == Errc::too_few_strata);

  // a stratum with no successes at all is skipped, not fatal
  std::vector<OutcomeRow> mixed = rows;
  for (int i = 0; i < 50; ++i) mixed.push_back(row("dead", i % 2 ? "v1" : "v2", 0.0));
  CHECK(code_of([&] { interaction_scan(mixed); }) == Errc::too_few_strata);
}

TEST_CASE("interaction scan: proportional strata give zero heterogeneity") {
  // every stratum table proportional to the pooled table
  std::vector<OutcomeRow> rows;
  auto add = [&](const std::string& g, const std::string& c, int successes, int failures) {
    for (int i = 0; i < successes; ++i) rows.push_back(row(g, c, 1.0));
    for (int i = 0; i < failures; ++i) rows.push_back(row(g, c, 0.0));
  };
  // stratum s1 = 2x stratum s2, cell for cell
  add("s1", "v1", 20, 80);
  add("s1", "v2", 40, 60);
  add("s2", "v1", 10, 40);
  add("s2", "v2", 20, 30);
  auto result = interaction_scan(rows);
  CHECK(result.heterogeneity.statistic == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(result.heterogeneity.p_value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ipw: hand-computed nine-record log under uniform propensities") {
  // 9 records, 3 per condition, propensity exactly 1/3.  IPW estimate equals
  // 3 x (conditional mean) x (fraction assigned) = the plain per-arm mean.
  std::vector<OutcomeRow> rows;
  const double p = 1.0 / 3;
  // v1: rewards 1,0,1 -> mean 2/3 ; v2: 0,0,0 ; v3: 1,1,1
  for (double r : {1.0, 0.0, 1.0}) rows.push_back(row("", "v1", r, true, p));
  for (double r : {0.0, 0.0, 0.0}) rows.push_back(row("", "v2", r, true, p));
  for (double r : {1.0, 1.0, 1.0}) rows.push_back(row("", "v3", r, true, p));

  auto estimates = ipw_mean(rows);
  REQUIRE(estimates.size() == 3);
  CHECK(estimates[0].condition == "v1");
  CHECK(estimates[0].estimate == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(estimates[1].estimate == doctest::Approx(0.0));
  CHECK(estimates[2].estimate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(estimates[0].n_chosen == 3);
}

TEST_CASE("ipw: all-zero rewards give estimate 0 with SE 0") {
  std::vector<OutcomeRow> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(row("", i % 2 ? "a" : "b", 0.0, true, 0.5));
  for (const auto& est : ipw_mean(rows)) {
    CHECK(est.estimate == 0.0);
    CHECK(est.std_error == 0.0);
  }
}

TEST_CASE("ipw: Monte Carlo consistency under weights (1/6, 1/3, 1/2)") {
  // true rates (0.1, 0.2, 0.3); n = 50000
  std::mt19937_64 gen(31415);
  auto uniform = [&] { return (gen() >> 11) * 0x1.0p-53; };
  const std::vector<std::string> arms = {"v1", "v2", "v3"};
  const std::vector<double> weights = {1.0 / 6, 1.0 / 3, 1.0 / 2};
  const std::vector<double> truth = {0.1, 0.2, 0.3};

  std::vector<OutcomeRow> rows;
  rows.reserve(50000);
  for (int i = 0; i < 50000; ++i) {
    const double u = uniform();
    std::size_t arm = u < weights[0] ? 0 : (u < weights[0] + weights[1] ? 1 : 2);
    rows.push_back(row("", arms[arm], uniform() < truth[arm] ? 1.0 : 0.0, true, weights[arm]));
  }
  auto estimates = ipw_mean(rows);
  REQUIRE(estimates.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CAPTURE(a);
    CHECK(std::abs(estimates[a].estimate - truth[a]) < 0.01);
    CHECK(estimates[a].std_error > 0.0);
    CHECK(estimates[a].std_error < 0.01);
  }
}

TEST_CASE("ipw: refuses estimated propensities unless overridden, rejects zeros") {
  std::vector<OutcomeRow> rows = {row("", "v1", 1.0, true, 0.5, /*estimated=*/true),
                                  row("", "v2", 0.0, true, 0.5, true)};
  CHECK(code_of([&] { ipw_mean(rows); }) == Errc::estimated_propensity);
  CHECK_NOTHROW(ipw_mean(rows, /*allow_estimated=*/true));

  std::vector<OutcomeRow> zero = {row("", "v1", 1.0, true, 0.0)};
  CHECK(code_of([&] { ipw_mean(zero); }) == Errc::zero_propensity);
}
