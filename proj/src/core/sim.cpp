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

#include "core/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "core/engine.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/variable_store.hpp"

namespace mooclet::sim {

namespace {

[[noreturn]] void bad_scenario(const std::string& message) {
  fail(Errc::invalid_scenario, message);
}

}  // namespace

Scenario Scenario::parse(const json& j) {
  Scenario s;
  s.name = j.value("name", "scenario");
  s.seed = j.value("seed", std::uint64_t{0});
  s.population = j.value("population", std::int64_t{0});
  if (s.population <= 0) bad_scenario("population must be positive");
  const std::string mode = j.value("reward_mode", "wave_end");
  if (mode == "immediate") {
    s.immediate_rewards = true;
  } else if (mode != "wave_end") {
    bad_scenario("reward_mode must be 'wave_end' or 'immediate'");
  }
  s.outcome_variable = j.value("outcome_variable", "responded");

  std::set<std::string> char_names;
  for (const auto& cj : j.value("characteristics", json::array())) {
    Characteristic c;
    c.name = cj.at("name").get<std::string>();
    if (!char_names.insert(c.name).second) bad_scenario("duplicate characteristic " + c.name);
    if (cj.contains("numeric")) {
      c.is_numeric = true;
      c.min = cj.at("numeric").value("min", 0.0);
      c.max = cj.at("numeric").value("max", 1.0);
      c.integer_valued = cj.at("numeric").value("integer", false);
      if (!(c.max >= c.min)) bad_scenario("numeric range for " + c.name + " is empty");
      if (cj.contains("bin_into")) {
        const auto& bj = cj.at("bin_into");
        c.bin_into_name = bj.at("name").get<std::string>();
        if (bj.contains("boundaries")) {
          c.bin_boundaries = bj.at("boundaries").get<std::vector<double>>();
          c.bin_labels = bj.at("labels").get<std::vector<std::string>>();
          if (c.bin_labels.size() != c.bin_boundaries.size() + 1) {
            bad_scenario("bin_into needs one more label than boundaries");
          }
        } else {
          c.bin_into_n = bj.value("n_bins", 5);
          if (c.bin_into_n < 1) bad_scenario("bin_into.n_bins must be >= 1");
        }
        if (!char_names.insert(c.bin_into_name).second) {
          bad_scenario("duplicate characteristic " + c.bin_into_name);
        }
      }
    } else {
      c.categories = cj.at("categories").get<std::vector<std::string>>();
      c.probs = cj.at("probs").get<std::vector<double>>();
      if (c.categories.empty() || c.categories.size() != c.probs.size()) {
        bad_scenario("characteristic " + c.name + " needs matching categories/probs");
      }
      double sum = 0.0;
      for (double p : c.probs) {
        if (p < 0.0 || p > 1.0) bad_scenario("probability out of range in " + c.name);
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) bad_scenario("probs for " + c.name + " must sum to 1");
    }
    s.characteristics.push_back(std::move(c));
  }

  if (!j.contains("factors") || j.at("factors").empty()) bad_scenario("factors must be non-empty");
  std::set<std::string> factor_names;
  for (const auto& fj : j.at("factors")) {
    Factor f;
    f.name = fj.at("name").get<std::string>();
    if (!factor_names.insert(f.name).second) bad_scenario("duplicate factor " + f.name);
    f.versions = fj.at("versions").get<std::vector<std::string>>();
    if (f.versions.empty()) bad_scenario("factor " + f.name + " has no versions");
    s.factors.push_back(std::move(f));
  }

  if (j.contains("response_model")) {
    s.has_response_model = true;
    const auto& rm = j.at("response_model");
    s.default_prob = rm.at("default").get<double>();
    if (s.default_prob < 0.0 || s.default_prob > 1.0) bad_scenario("default prob out of range");
    for (const auto& cj : rm.value("cells", json::array())) {
      Cell cell;
      cell.prob = cj.at("prob").get<double>();
      if (cell.prob < 0.0 || cell.prob > 1.0) bad_scenario("cell prob out of range");
      const json when = cj.value("when", json::object());
      const json when_factors = when.value("factors", json::object());
      for (const auto& [factor, version] : when_factors.items()) {
        if (!factor_names.count(factor)) bad_scenario("cell references unknown factor " + factor);
        cell.factor_versions[factor] = version.get<std::string>();
      }
      const json when_subgroup = when.value("subgroup", json::object());
      for (const auto& [var, val] : when_subgroup.items()) {
        cell.subgroup[var] = val.get<std::string>();
      }
      s.cells.push_back(std::move(cell));
    }
  }

  if (!j.contains("waves") || j.at("waves").empty()) bad_scenario("waves must be non-empty");
  std::int64_t total = 0;
  for (const auto& wj : j.at("waves")) {
    Wave w;
    w.size = wj.at("size").get<std::int64_t>();
    if (w.size <= 0) bad_scenario("wave size must be positive");
    w.policy = wj.value("policy", json{{"kind", "uniform_random"}});
    total += w.size;
    s.waves.push_back(std::move(w));
  }
  if (total > s.population) bad_scenario("wave sizes exceed the population");
  return s;
}

double Scenario::response_prob(const std::map<std::string, std::string>& chosen,
                               const std::map<std::string, std::string>& learner_chars) const {
  for (const auto& cell : cells) {
    bool match = true;
    for (const auto& [factor, version] : cell.factor_versions) {
      auto it = chosen.find(factor);
      if (it == chosen.end() || it->second != version) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    for (const auto& [var, val] : cell.subgroup) {
      auto it = learner_chars.find(var);
      if (it == learner_chars.end() || it->second != val) {
        match = false;
        break;
      }
    }
    if (match) return cell.prob;
  }
  return default_prob;
}

double Scenario::best_prob(const std::map<std::string, std::string>& learner_chars) const {
  // Exhaustive walk over the condition tuples (desk-scale designs).
  std::map<std::string, std::string> chosen;
  double best = 0.0;
  std::function<void(std::size_t)> walk = [&](std::size_t f) {
    if (f == factors.size()) {
      best = std::max(best, response_prob(chosen, learner_chars));
      return;
    }
    for (const auto& v : factors[f].versions) {
      chosen[factors[f].name] = v;
      walk(f + 1);
    }
    chosen.erase(factors[f].name);
  };
  walk(0);
  return best;
}

namespace {

struct Learner {
  std::string id;
  std::map<std::string, std::string> categorical;  // incl. derived bins
  std::map<std::string, double> numeric;
};

std::string learner_id(std::int64_t index) {
  std::ostringstream os;
  os << "L" << std::setw(6) << std::setfill('0') << index + 1;
  return os.str();
}

std::vector<Learner> generate_population(const Scenario& scenario, Engine& engine) {
  Rng rng(derive_seed(scenario.seed, "population"));
  std::vector<Learner> learners(static_cast<std::size_t>(scenario.population));

  // Register external characteristics up front.
  for (const auto& c : scenario.characteristics) {
    VariableDef def;
    def.name = c.name;
    if (c.is_numeric) {
      def.kind = VarKind::numeric;
    } else {
      def.kind = VarKind::categorical;
      def.categories = c.categories;
    }
    def.source = VarSource::external;
    engine.register_variable(def.to_json());
  }
  VariableDef outcome;
  outcome.name = scenario.outcome_variable;
  outcome.kind = VarKind::binary;
  outcome.source = VarSource::outcome;
  engine.register_variable(outcome.to_json());

  for (std::int64_t i = 0; i < scenario.population; ++i) {
    auto& learner = learners[static_cast<std::size_t>(i)];
    learner.id = learner_id(i);
    for (const auto& c : scenario.characteristics) {
      if (c.is_numeric) {
        double value;
        if (c.integer_valued) {
          const auto span = static_cast<std::uint64_t>(c.max - c.min) + 1;
          value = c.min + static_cast<double>(rng.next_below(span));
        } else {
          value = c.min + rng.next_double() * (c.max - c.min);
        }
        learner.numeric[c.name] = value;
      } else {
        const double u = rng.next_double();
        double cum = 0.0;
        std::size_t pick = c.categories.size() - 1;
        for (std::size_t k = 0; k < c.probs.size(); ++k) {
          cum += c.probs[k];
          if (u < cum) {
            pick = k;
            break;
          }
        }
        learner.categorical[c.name] = c.categories[pick];
      }
    }
  }

  // Record raw values, then fit quantile bins on the realized sample and
  // register the derived categoricals.
  std::int64_t ts = 0;
  for (const auto& learner : learners) {
    for (const auto& c : scenario.characteristics) {
      json value = c.is_numeric ? json(learner.numeric.at(c.name))
                                : json(learner.categorical.at(c.name));
      engine.record_value(json{{"learner_id", learner.id},
                               {"variable", c.name},
                               {"value", value},
                               {"timestamp", ts}});
    }
    ++ts;
  }
  for (const auto& c : scenario.characteristics) {
    if (!c.is_numeric || c.bin_into_name.empty()) continue;
    BinningSpec spec;
    if (!c.bin_labels.empty()) {
      spec.source_variable = c.name;
      spec.boundaries = c.bin_boundaries;
      spec.bin_labels = c.bin_labels;
      spec.n_bins = static_cast<int>(c.bin_labels.size());
      spec.validate();
    } else {
      std::vector<double> values;
      values.reserve(learners.size());
      for (const auto& learner : learners) values.push_back(learner.numeric.at(c.name));
      spec = fit_quantile_bins(values, c.bin_into_n, c.name);
    }
    VariableDef derived;
    derived.name = c.bin_into_name;
    derived.kind = VarKind::categorical;
    derived.categories = spec.bin_labels;
    derived.source = VarSource::derived;
    engine.register_variable(derived.to_json());
    for (auto& learner : learners) {
      const std::string& label = apply_binning(spec, learner.numeric.at(c.name));
      engine.record_value(json{{"learner_id", learner.id},
                               {"variable", c.bin_into_name},
                               {"value", label},
                               {"timestamp", ts}});
      learner.categorical[c.bin_into_name] = label;
    }
    ++ts;
  }
  return learners;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario,
                       const std::optional<std::string>& trace_path) {
  Engine::Config config;
  config.seed = scenario.seed;
  config.clock = [] { return std::int64_t{0}; };  // callers pass explicit times
  auto engine = Engine::in_memory(config);

  std::vector<Learner> learners = generate_population(scenario, *engine);

  // One mooclet per factor.
  std::vector<std::string> factor_ids;
  for (const auto& f : scenario.factors) {
    json versions = json::array();
    for (const auto& v : f.versions) versions.push_back(json{{"id", v}, {"label", v}});
    json created = engine->create_mooclet(json{{"name", f.name},
                                               {"versions", versions},
                                               {"outcome_variable", scenario.outcome_variable}});
    factor_ids.push_back(created.at("id").get<std::string>());
  }

  Rng reward_rng(derive_seed(scenario.seed, "rewards"));

  RunResult result;
  double regret = 0.0;
  json regret_curve = json::array();
  json wave_reports = json::array();
  std::int64_t step = 0;
  std::int64_t total_assignments = 0;
  double total_responses = 0.0;
  std::int64_t cursor = 0;
  std::int64_t ts = scenario.population + 8;  // after the population value events

  for (std::size_t wave_index = 0; wave_index < scenario.waves.size(); ++wave_index) {
    const auto& wave = scenario.waves[wave_index];

    // Wave boundary: install the wave policy (re-seeding contextual counts
    // from history), then rebalance proportional weights from those counts.
    for (const auto& mid : factor_ids) {
      engine->set_policy(mid, wave.policy, std::nullopt);
      if (wave.policy.at("kind").get<std::string>() == "proportional_contextual") {
        engine->rebalance(mid);
      }
    }

    struct Pending {
      std::string assignment_id;
      double reward;
    };
    std::vector<Pending> pending;
    std::int64_t wave_assignments = 0;
    double wave_responses = 0.0;

    for (std::int64_t k = 0; k < wave.size; ++k, ++cursor) {
      const Learner& learner = learners[static_cast<std::size_t>(cursor)];
      std::map<std::string, std::string> chosen;
      std::vector<std::string> assignment_ids;
      for (std::size_t f = 0; f < factor_ids.size(); ++f) {
        json res = engine->request_version(factor_ids[f], learner.id,
                                           std::to_string(wave_index), ts);
        chosen[scenario.factors[f].name] = res.at("version_id").get<std::string>();
        assignment_ids.push_back(res.at("assignment_id").get<std::string>());
      }
      ++ts;
      ++step;

      if (scenario.has_response_model) {
        const double p = scenario.response_prob(chosen, learner.categorical);
        const double reward = reward_rng.next_double() < p ? 1.0 : 0.0;
        regret += scenario.best_prob(learner.categorical) - p;

        for (const auto& aid : assignment_ids) {
          result.rewards[aid] = reward;
          if (scenario.immediate_rewards) {
            engine->record_reward(aid, reward, {}, ts);
          } else {
            pending.push_back(Pending{aid, reward});
          }
        }

        ++wave_assignments;
        wave_responses += reward;
        ++total_assignments;
        total_responses += reward;
      } else {
        ++wave_assignments;
        ++total_assignments;
      }

      if (step % 100 == 0) {
        regret_curve.push_back(json::array({step, regret}));
      }
    }

    // Reveal this wave's rewards at the boundary (default batch timing).
    std::int64_t boundary_ts = ts;
    for (const auto& p : pending) {
      engine->record_reward(p.assignment_id, p.reward, {}, boundary_ts);
    }
    ts = boundary_ts + 1;

    json wave_report{{"index", wave_index},
                     {"size", wave.size},
                     {"policy_kind", wave.policy.at("kind")},
                     {"assignments", wave_assignments}};
    if (scenario.has_response_model) {
      wave_report["responses"] = wave_responses;
      wave_report["rate"] =
          wave_assignments > 0 ? wave_responses / static_cast<double>(wave_assignments) : 0.0;
    }
    wave_report["holdout"] = json();
    wave_report["adaptive"] = json();
    wave_reports.push_back(std::move(wave_report));
  }

  // Collect the full trail from the engine (log order).
  result.records = engine->assignment_records("");
  result.final_regret = regret;

  // Per-wave holdout/adaptive splits and per-subgroup modal arms come from
  // the records themselves.
  std::map<std::size_t, std::map<bool, std::pair<std::int64_t, double>>> split;
  std::map<std::string, std::map<std::string, std::map<std::string, std::int64_t>>> modal;
  for (const auto& rec : result.records) {
    const std::size_t wave_index = static_cast<std::size_t>(std::stoll(rec.wave));
    auto reward_it = result.rewards.find(rec.assignment_id);
    const double reward = reward_it != result.rewards.end() ? reward_it->second : 0.0;
    auto& bucket = split[wave_index][rec.holdout];
    bucket.first += 1;
    bucket.second += reward;
    const std::string sg = rec.subgroup ? rec.subgroup->serialize() : "";
    modal[rec.mooclet_id][sg][rec.version_id] += 1;
  }
  for (auto& wave_report : wave_reports) {
    const auto wave_index = wave_report.at("index").get<std::size_t>();
    auto it = split.find(wave_index);
    if (it == split.end()) continue;
    const auto ho = it->second.find(true);
    const auto ad = it->second.find(false);
    if (ho != it->second.end()) {
      wave_report["holdout"] = json{{"count", ho->second.first},
                                    {"responses", ho->second.second},
                                    {"rate", ho->second.first > 0
                                                 ? ho->second.second / ho->second.first
                                                 : 0.0}};
      wave_report["adaptive"] =
          ad != it->second.end()
              ? json{{"count", ad->second.first},
                     {"responses", ad->second.second},
                     {"rate", ad->second.first > 0 ? ad->second.second / ad->second.first : 0.0}}
              : json();
    }
  }
  json modal_json = json::object();
  for (std::size_t f = 0; f < factor_ids.size(); ++f) {
    json per_subgroup = json::object();
    auto it = modal.find(factor_ids[f]);
    if (it != modal.end()) {
      for (const auto& [sg, versions] : it->second) {
        std::string best;
        std::int64_t best_count = -1;
        for (const auto& [vid, count] : versions) {
          if (count > best_count) {
            best_count = count;
            best = vid;
          }
        }
        per_subgroup[sg] = best;
      }
    }
    modal_json[scenario.factors[f].name] = std::move(per_subgroup);
  }

  result.report = json{{"scenario", scenario.name},
                       {"seed", scenario.seed},
                       {"waves", wave_reports},
                       {"cumulative",
                        json{{"assignments", total_assignments},
                             {"responses", total_responses},
                             {"rate", total_assignments > 0
                                          ? total_responses / static_cast<double>(total_assignments)
                                          : 0.0}}},
                       {"regret", json{{"final", regret}, {"curve", regret_curve}}},
                       {"modal_arms", modal_json},
                       {"trace_file", trace_path ? json(*trace_path) : json()}};

  if (trace_path) {
    std::ofstream out(*trace_path, std::ios::trunc | std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write trace file '" + *trace_path + "'");
    for (const auto& rec : result.records) {
      auto reward_it = result.rewards.find(rec.assignment_id);
      json line{{"record", rec.to_json()},
                {"reward", reward_it != result.rewards.end() ? json(reward_it->second) : json()}};
      out << line.dump() << '\n';
    }
  }
  return result;
}

json compare_policies(const Scenario& scenario, const std::vector<json>& policies,
                      int replications, int threads) {
  if (replications < 1) fail(Errc::invalid_argument, "replications must be >= 1");
  if (policies.empty()) fail(Errc::invalid_argument, "need at least one policy");
  if (threads < 1) threads = 1;

  struct RunStats {
    double cumulative_rate = 0.0;
    double comparison_rate = 0.0;
    std::vector<std::pair<std::int64_t, double>> regret_curve;
  };

  auto run_one = [&](std::size_t policy_index, int rep) {
    Scenario variant = scenario;
    variant.seed = derive_seed(scenario.seed, "rep" + std::to_string(rep));
    const std::size_t first_replaced = variant.waves.size() == 1 ? 0 : 1;
    for (std::size_t w = first_replaced; w < variant.waves.size(); ++w) {
      variant.waves[w].policy = policies[policy_index];
    }
    RunResult run = run_scenario(variant);

    RunStats stats;
    stats.cumulative_rate = run.report.at("cumulative").at("rate").get<double>();
    double comp_assignments = 0.0;
    double comp_responses = 0.0;
    const auto& waves = run.report.at("waves");
    for (std::size_t w = first_replaced; w < waves.size(); ++w) {
      comp_assignments += waves[w].value("assignments", std::int64_t{0});
      comp_responses += waves[w].value("responses", 0.0);
    }
    stats.comparison_rate = comp_assignments > 0 ? comp_responses / comp_assignments : 0.0;
    for (const auto& point : run.report.at("regret").at("curve")) {
      stats.regret_curve.emplace_back(point[0].get<std::int64_t>(), point[1].get<double>());
    }
    return stats;
  };

  json policy_reports = json::array();
  double baseline_comparison_mean = 0.0;

  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::vector<RunStats> stats(static_cast<std::size_t>(replications));
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int rep = next.fetch_add(1);
        if (rep >= replications) break;
        stats[static_cast<std::size_t>(rep)] = run_one(p, rep);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, replications); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    auto mean_std = [&](auto getter) {
      double mean = 0.0;
      for (const auto& s : stats) mean += getter(s);
      mean /= static_cast<double>(stats.size());
      double var = 0.0;
      for (const auto& s : stats) {
        const double d = getter(s) - mean;
        var += d * d;
      }
      var = stats.size() > 1 ? var / static_cast<double>(stats.size() - 1) : 0.0;
      return std::make_pair(mean, std::sqrt(var));
    };
    const auto [cum_mean, cum_std] =
        mean_std([](const RunStats& s) { return s.cumulative_rate; });
    const auto [comp_mean, comp_std] =
        mean_std([](const RunStats& s) { return s.comparison_rate; });
    if (p == 0) baseline_comparison_mean = comp_mean;

    // Mean regret curve across replications (aligned by step).
    std::map<std::int64_t, std::pair<double, int>> curve_acc;
    for (const auto& s : stats) {
      for (const auto& [step, value] : s.regret_curve) {
        auto& acc = curve_acc[step];
        acc.first += value;
        acc.second += 1;
      }
    }
    json curve = json::array();
    for (const auto& [step, acc] : curve_acc) {
      curve.push_back(json::array({step, acc.first / acc.second}));
    }

    policy_reports.push_back(
        json{{"policy", policies[p]},
             {"mean_rate", cum_mean},
             {"std_rate", cum_std},
             {"mean_comparison_rate", comp_mean},
             {"std_comparison_rate", comp_std},
             {"lift_ratio", baseline_comparison_mean > 0 ? comp_mean / baseline_comparison_mean
                                                         : 0.0},
             {"regret_curve", curve}});
  }

  return json{{"scenario", scenario.name},
              {"replications", replications},
              {"policies", policy_reports}};
}

}  // namespace mooclet::sim
