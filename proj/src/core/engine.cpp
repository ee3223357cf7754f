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

#include "core/engine.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace mooclet {

namespace fs = std::filesystem;

namespace {

constexpr char kStickySeparator = '\x1f';

std::int64_t wall_clock_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string sticky_key(const std::string& learner, const std::string& wave) {
  return learner + kStickySeparator + wave;
}

}  // namespace

double PolicyRuntime::effective_epsilon(std::size_t n_versions) const {
  if (epsilon >= 0.0) return epsilon;
  if (n_versions == 0) return 0.0;
  return 0.1 / static_cast<double>(n_versions);
}

Engine::Engine(std::string data_dir, Config config)
    : config_(std::move(config)), data_dir_(std::move(data_dir)) {
  if (!config_.clock) config_.clock = wall_clock_millis;
}

std::unique_ptr<Engine> Engine::open(const std::string& data_dir, Config config) {
  if (data_dir.empty()) fail(Errc::invalid_argument, "data_dir must be non-empty");
  std::error_code ec;
  fs::create_directories(data_dir, ec);
  if (ec) fail(Errc::io_error, "cannot create data directory '" + data_dir + "'");

  auto engine = std::unique_ptr<Engine>(new Engine(data_dir, std::move(config)));
  const std::string log_path = (fs::path(data_dir) / "events.jsonl").string();

  // Newest snapshot first, then the log tail.
  std::int64_t snapshot_seq = 0;
  fs::path snapshot_path;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("snapshot-", 0) == 0 && entry.path().extension() == ".json") {
      const std::string digits = name.substr(9, name.size() - 9 - 5);
      try {
        const std::int64_t seq = std::stoll(digits);
        if (seq > snapshot_seq) {
          snapshot_seq = seq;
          snapshot_path = entry.path();
        }
      } catch (...) {
        // not a snapshot file; ignore
      }
    }
  }
  if (snapshot_seq > 0) {
    std::ifstream in(snapshot_path);
    if (in) {
      json snapshot = json::parse(in, nullptr, false);
      if (!snapshot.is_discarded()) {
        engine->load_snapshot(snapshot);
      } else {
        std::cerr << "warning: ignoring corrupt snapshot " << snapshot_path << "\n";
        snapshot_seq = 0;
      }
    } else {
      snapshot_seq = 0;
    }
  }

  auto events = EventLog::read_all(log_path);
  std::vector<json> tail;
  for (auto& ev : events) {
    if (ev.value("seq", std::int64_t{0}) > snapshot_seq) tail.push_back(std::move(ev));
  }
  engine->replay_from(tail);

  engine->log_ = EventLog(log_path);
  std::int64_t last = snapshot_seq;
  for (const auto& ev : tail) last = std::max(last, ev.value("seq", std::int64_t{0}));
  last = std::max(last, engine->last_sequence_no());
  engine->log_.set_last_seq(last);
  return engine;
}

std::unique_ptr<Engine> Engine::in_memory(Config config) {
  return std::unique_ptr<Engine>(new Engine("", std::move(config)));
}

std::int64_t Engine::last_sequence_no() const {
  std::lock_guard lock(state_mu_);
  return log_.last_seq();
}

void Engine::fail_log_writes_for_testing(bool fail_writes) {
  std::lock_guard lock(state_mu_);
  log_.fail_writes_for_testing(fail_writes);
}

Engine::MoocletEntry* Engine::find_mooclet(const std::string& id) const {
  std::lock_guard lock(state_mu_);
  auto it = mooclets_.find(id);
  if (it == mooclets_.end()) fail(Errc::unknown_mooclet, "no mooclet with id '" + id + "'");
  return it->second.get();
}

// ---------------------------------------------------------------------------
// Policy parsing and validation

PolicyRuntime Engine::parse_policy_runtime(const json& policy_json, const Mooclet& def,
                                           bool allow_delegates) const {
  if (!policy_json.is_object() || !policy_json.contains("kind")) {
    fail(Errc::invalid_policy, "policy body needs a 'kind'");
  }
  PolicyRuntime rt;
  rt.kind = policy_kind_from_name(policy_json.at("kind").get<std::string>());
  const json config = policy_json.value("config", json::object());
  if (!config.is_object()) fail(Errc::invalid_policy, "policy config must be an object");

  rt.sticky = config.value("sticky", true);

  switch (rt.kind) {
    case PolicyKind::uniform_random:
      break;
    case PolicyKind::weighted_random: {
      if (!config.contains("weights") || !config.at("weights").is_object()) {
        fail(Errc::invalid_policy, "weighted_random needs config.weights");
      }
      for (const auto& [id, w] : config.at("weights").items()) {
        if (!def.has_version(id)) {
          fail(Errc::unknown_version, "weight references unknown version '" + id + "'");
        }
        rt.fixed_weights[id] = w.get<double>();
      }
      if (rt.fixed_weights.size() != def.versions.size()) {
        fail(Errc::invalid_policy, "weights must cover every version exactly once");
      }
      validate_weights(rt.fixed_weights);
      break;
    }
    case PolicyKind::rule_based: {
      if (!config.contains("rules") || !config.at("rules").is_string()) {
        fail(Errc::invalid_policy, "rule_based needs config.rules (policy text)");
      }
      rt.rules = dsl::parse_policy(config.at("rules").get<std::string>());
      auto diagnostics = dsl::check_policy(rt.rules, def, store_);
      if (!diagnostics.empty()) {
        std::string message;
        for (const auto& d : diagnostics) {
          if (!message.empty()) message += "; ";
          message += d.render("policy");
        }
        fail(Errc::invalid_policy, message);
      }
      if (config.contains("delegates")) {
        if (!allow_delegates) {
          fail(Errc::invalid_policy, "delegate policies cannot declare their own delegates");
        }
        for (const auto& [name, sub] : config.at("delegates").items()) {
          auto child = std::make_shared<PolicyRuntime>(
              parse_policy_runtime(sub, def, /*allow_delegates=*/false));
          if (child->kind == PolicyKind::rule_based) {
            fail(Errc::invalid_policy, "delegate '" + name + "' must not be rule_based");
          }
          rt.delegates.emplace(name, std::move(child));
        }
      }
      if (rt.rules.default_is_delegate && !rt.delegates.count(rt.rules.default_target)) {
        fail(Errc::invalid_policy,
             "DEFAULT POLICY '" + rt.rules.default_target + "' is not a configured delegate");
      }
      break;
    }
    case PolicyKind::ts_contextual:
    case PolicyKind::proportional_contextual: {
      for (const auto& name : config.value("subgroup_variables", std::vector<std::string>{})) {
        const VariableDef* var = store_.find(name);
        if (!var || var->kind != VarKind::categorical) {
          fail(Errc::unregistered_subgroup_variable,
               "subgroup variable '" + name + "' must be a registered categorical variable");
        }
        rt.subgroup_variables.push_back(name);
      }
      if (config.contains("epsilon")) {
        rt.epsilon = config.at("epsilon").get<double>();
        const double n = static_cast<double>(def.versions.size());
        if (rt.epsilon < 0.0 || (n > 0 && rt.epsilon * n > 1.0 + kWeightSumTolerance)) {
          fail(Errc::invalid_floor, "epsilon * n_versions must lie in [0, 1]");
        }
      }
      if (config.contains("smoothing")) {
        const auto& s = config.at("smoothing");
        rt.smoothing_s0 = s.value("s0", 1.0);
        rt.smoothing_t0 = s.value("t0", 2.0);
        if (rt.smoothing_s0 < 0.0 || rt.smoothing_t0 < 0.0) {
          fail(Errc::invalid_policy, "smoothing constants must be >= 0");
        }
      }
      if (config.contains("priors")) {
        const auto& p = config.at("priors");
        rt.prior_alpha = p.value("alpha", 1.0);
        rt.prior_beta = p.value("beta", 1.0);
        if (!(rt.prior_alpha > 0.0) || !(rt.prior_beta > 0.0)) {
          fail(Errc::invalid_policy, "priors must be positive");
        }
      }
      rt.holdout_fraction = config.value("holdout_fraction", 0.0);
      if (rt.holdout_fraction < 0.0 || rt.holdout_fraction >= 1.0) {
        fail(Errc::invalid_policy, "holdout_fraction must lie in [0, 1)");
      }
      const std::string mode = config.value("rebalance_mode", "batch");
      if (mode == "per_event") {
        rt.per_event_rebalance = true;
      } else if (mode != "batch") {
        fail(Errc::invalid_policy, "rebalance_mode must be 'batch' or 'per_event'");
      }
      rt.thompson_resamples = config.value("propensity_resamples", 1000);
      if (rt.thompson_resamples < 1) {
        fail(Errc::invalid_policy, "propensity_resamples must be >= 1");
      }
      break;
    }
  }
  return rt;
}

std::string Engine::check_policy_body(const std::string& mooclet_id,
                                      const json& policy_body) const {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::scoped_lock lock(entry->mu, state_mu_);
  PolicyRuntime rt = parse_policy_runtime(policy_body, entry->def);
  return policy_kind_name(rt.kind);
}

// ---------------------------------------------------------------------------
// Subgroup state

Engine::SubgroupState& Engine::ensure_subgroup(MoocletEntry& entry, const SubgroupKey& key) const {
  const std::string skey = key.serialize();
  auto [it, inserted] = entry.state.try_emplace(skey);
  if (inserted) it->second.key = key;
  return it->second;
}

ArmState& Engine::ensure_arm(SubgroupState& sg, const std::string& version_id,
                             const PolicyRuntime& policy) const {
  auto [it, inserted] = sg.arms.try_emplace(version_id);
  if (inserted) {
    it->second.version_id = version_id;
    it->second.alpha = policy.prior_alpha;
    it->second.beta = policy.prior_beta;
  }
  return it->second;
}

void Engine::recompute_weights(MoocletEntry& entry, SubgroupState& sg) const {
  std::vector<VersionCounts> counts;
  counts.reserve(entry.def.versions.size());
  for (const auto& version : entry.def.versions) {
    VersionCounts c;
    c.version_id = version.id;
    auto it = sg.arms.find(version.id);
    if (it != sg.arms.end()) {
      c.successes = it->second.successes;
      c.trials = it->second.trials;
    }
    counts.push_back(std::move(c));
  }
  sg.weights = compute_proportional_weights(
      counts, entry.policy.effective_epsilon(entry.def.versions.size()),
      entry.policy.smoothing_s0, entry.policy.smoothing_t0);
  sg.weights_initialized = true;
}

void Engine::seed_contextual_state(MoocletEntry& entry) const {
  // Installing a policy re-derives per-subgroup counters from the mooclet's
  // full reward history, keyed by the learners' *current* profile values over
  // the new subgroup variables.  This is what lets a plain randomized wave
  // feed a later contextual policy.
  entry.state.clear();
  for (const auto& assignment_id : assignment_order_) {
    auto rec_it = assignments_.find(assignment_id);
    if (rec_it == assignments_.end()) continue;
    const AssignmentRecord& rec = rec_it->second;
    if (rec.mooclet_id != entry.def.id) continue;
    auto reward_it = rewards_.find(assignment_id);
    if (reward_it == rewards_.end()) continue;
    const Profile profile = store_.learner_profile(rec.learner_id);
    const SubgroupKey key = subgroup_from_profile(entry.policy.subgroup_variables, profile);
    SubgroupState& sg = ensure_subgroup(entry, key);
    ensure_arm(sg, rec.version_id, entry.policy).add_reward(reward_it->second);
  }
}

// ---------------------------------------------------------------------------
// Decision

void Engine::decide_with(const PolicyRuntime& policy, MoocletEntry& entry,
                         const Profile& profile, AssignmentRecord& record) const {
  std::vector<std::string> version_ids;
  version_ids.reserve(entry.def.versions.size());
  for (const auto& v : entry.def.versions) version_ids.push_back(v.id);

  switch (policy.kind) {
    case PolicyKind::uniform_random: {
      auto [version, propensity] = assign_uniform(version_ids, entry.rng);
      record.version_id = version;
      record.propensity = std::move(propensity);
      return;
    }
    case PolicyKind::weighted_random: {
      record.version_id = assign_weighted(policy.fixed_weights, entry.rng);
      record.propensity = policy.fixed_weights;
      return;
    }
    case PolicyKind::rule_based: {
      const dsl::Decision decision = dsl::evaluate_rules(policy.rules, profile);
      if (decision.kind == dsl::Decision::Kind::version) {
        if (!entry.def.has_version(decision.target)) {
          fail(Errc::unknown_version,
               "rule decision '" + decision.target + "' is not a version of this mooclet");
        }
        record.version_id = decision.target;
        record.propensity = WeightVector{{decision.target, 1.0}};
        return;
      }
      decide_with(*policy.delegates.at(decision.target), entry, profile, record);
      return;
    }
    case PolicyKind::ts_contextual:
    case PolicyKind::proportional_contextual: {
      const SubgroupKey key = subgroup_from_profile(policy.subgroup_variables, profile);
      record.subgroup = key;

      if (policy.holdout_fraction > 0.0 &&
          entry.rng.next_double() < policy.holdout_fraction) {
        // Continued fully-random slice; the flag plus the branch-conditional
        // propensity keep the log analyzable.
        auto [version, propensity] = assign_uniform(version_ids, entry.rng);
        record.version_id = version;
        record.propensity = std::move(propensity);
        record.holdout = true;
        return;
      }

      auto state_it = entry.state.find(key.serialize());
      if (policy.kind == PolicyKind::proportional_contextual) {
        WeightVector weights;
        if (state_it != entry.state.end() && state_it->second.weights_initialized) {
          weights = state_it->second.weights;
        } else {
          const double p = 1.0 / static_cast<double>(version_ids.size());
          for (const auto& id : version_ids) weights[id] = p;
        }
        record.version_id = assign_weighted(weights, entry.rng);
        record.propensity = std::move(weights);
        return;
      }

      std::vector<ArmState> arms;
      arms.reserve(version_ids.size());
      for (const auto& id : version_ids) {
        if (state_it != entry.state.end()) {
          auto arm_it = state_it->second.arms.find(id);
          if (arm_it != state_it->second.arms.end()) {
            arms.push_back(arm_it->second);
            continue;
          }
        }
        ArmState fresh;
        fresh.version_id = id;
        fresh.alpha = policy.prior_alpha;
        fresh.beta = policy.prior_beta;
        arms.push_back(std::move(fresh));
      }
      ThompsonResult result = thompson_select(arms, entry.rng, policy.thompson_resamples);
      record.version_id = std::move(result.version_id);
      record.propensity = std::move(result.propensity);
      record.propensity_estimated = true;
      return;
    }
  }
}

Engine::Draft Engine::decide(MoocletEntry& entry, const Profile& profile,
                             const std::string& learner_id, const std::string& wave,
                             std::int64_t timestamp) const {
  Draft draft;
  AssignmentRecord& rec = draft.record;
  rec.learner_id = learner_id;
  rec.mooclet_id = entry.def.id;
  rec.policy_kind = entry.policy.kind;
  rec.policy_revision = entry.def.active_policy.revision;
  rec.wave = wave;
  rec.timestamp = timestamp;

  const std::string before = entry.rng.state_tag();
  decide_with(entry.policy, entry, profile, rec);
  rec.rng_seed_state = before + ":" + std::to_string(entry.rng.draws());

  const Version* version = entry.def.find_version(rec.version_id);
  draft.payload = version ? version->payload : json();
  return draft;
}

// ---------------------------------------------------------------------------
// Commit pipeline

void Engine::validate_event(const json& event) const {
  const std::string type = event.at("type").get<std::string>();

  if (type == "register_variable") {
    VariableDef def = VariableDef::from_json(event.at("def"));
    def.validate();
    if (store_.is_registered(def.name)) {
      fail(Errc::duplicate_variable, "variable '" + def.name + "' is already registered");
    }
    return;
  }

  if (type == "value") {
    ValueEvent ev = ValueEvent::from_json(event.at("event"));
    if (ev.learner_id.empty()) fail(Errc::invalid_argument, "learner_id must be non-empty");
    store_.check_value(ev.variable, ev.value);
    store_.validate_timestamp(ev);
    return;
  }

  if (type == "create_mooclet") {
    const json& m = event.at("mooclet");
    const std::string name = m.at("name").get<std::string>();
    if (name.empty()) fail(Errc::invalid_argument, "mooclet name must be non-empty");
    if (id_by_name_.count(name)) {
      fail(Errc::duplicate_name, "a mooclet named '" + name + "' already exists");
    }
    Mooclet def = Mooclet::from_json(m);
    std::set<std::string> ids;
    for (const auto& v : def.versions) {
      if (v.id.empty()) fail(Errc::invalid_argument, "version id must be non-empty");
      if (!ids.insert(v.id).second) {
        fail(Errc::duplicate_name, "duplicate version id '" + v.id + "'");
      }
    }
    parse_policy_runtime(m.at("active_policy"), def);
    return;
  }

  const auto find_entry = [&](const std::string& key) -> MoocletEntry* {
    const std::string id = event.at(key).get<std::string>();
    auto it = mooclets_.find(id);
    if (it == mooclets_.end()) fail(Errc::unknown_mooclet, "no mooclet with id '" + id + "'");
    return it->second.get();
  };

  if (type == "add_version") {
    MoocletEntry* entry = find_entry("mooclet_id");
    Version v = Version::from_json(event.at("version"));
    if (v.id.empty()) fail(Errc::invalid_argument, "version id must be non-empty");
    if (entry->def.has_version(v.id)) {
      fail(Errc::duplicate_name, "version '" + v.id + "' already exists");
    }
    return;
  }

  if (type == "set_policy") {
    MoocletEntry* entry = find_entry("mooclet_id");
    const json& policy = event.at("policy");
    parse_policy_runtime(policy, entry->def);
    const std::int64_t new_revision = policy.at("revision").get<std::int64_t>();
    if (new_revision != entry->def.active_policy.revision + 1) {
      fail(Errc::revision_conflict, "policy revision advanced concurrently");
    }
    return;
  }

  if (type == "rebalance") {
    MoocletEntry* entry = find_entry("mooclet_id");
    if (entry->policy.kind != PolicyKind::proportional_contextual) {
      fail(Errc::invalid_policy, "rebalance applies to proportional_contextual policies");
    }
    return;
  }

  if (type == "assignment") {
    return;  // the decision already validated everything it needed
  }

  if (type == "reward") {
    const std::string assignment_id = event.at("assignment_id").get<std::string>();
    auto it = assignments_.find(assignment_id);
    if (it == assignments_.end()) {
      fail(Errc::unknown_assignment, "no assignment '" + assignment_id + "'");
    }
    if (rewards_.count(assignment_id)) {
      fail(Errc::duplicate_reward, "assignment '" + assignment_id + "' already has a reward");
    }
    if (event.contains("value_event") && !event.at("value_event").is_null()) {
      ValueEvent ev = ValueEvent::from_json(event.at("value_event"));
      store_.check_value(ev.variable, ev.value);
      store_.validate_timestamp(ev);
    }
    return;
  }

  fail(Errc::invalid_argument, "unknown event type '" + type + "'");
}

void Engine::apply_event(const json& event, bool from_replay) {
  const std::string type = event.at("type").get<std::string>();
  const std::int64_t seq = event.at("seq").get<std::int64_t>();

  if (type == "register_variable") {
    store_.register_variable(VariableDef::from_json(event.at("def")));
    return;
  }

  if (type == "value") {
    ValueEvent ev = ValueEvent::from_json(event.at("event"));
    ev.sequence_no = seq;
    store_.record(std::move(ev));
    return;
  }

  if (type == "create_mooclet") {
    Mooclet def = Mooclet::from_json(event.at("mooclet"));
    auto entry = std::make_unique<MoocletEntry>(def, derive_seed(config_.seed, def.id));
    entry->outcome_variable = event.value("outcome_variable", "");
    entry->policy = parse_policy_runtime(event.at("mooclet").at("active_policy"), entry->def);
    id_by_name_[def.name] = def.id;
    mooclets_[def.id] = std::move(entry);
    return;
  }

  if (type == "add_version") {
    MoocletEntry& entry = *mooclets_.at(event.at("mooclet_id").get<std::string>());
    entry.def.versions.push_back(Version::from_json(event.at("version")));
    return;
  }

  if (type == "set_policy") {
    MoocletEntry& entry = *mooclets_.at(event.at("mooclet_id").get<std::string>());
    entry.def.active_policy = PolicyRef::from_json(event.at("policy"));
    entry.policy = parse_policy_runtime(event.at("policy"), entry.def);
    seed_contextual_state(entry);
    return;
  }

  if (type == "rebalance") {
    MoocletEntry& entry = *mooclets_.at(event.at("mooclet_id").get<std::string>());
    for (auto& [skey, sg] : entry.state) recompute_weights(entry, sg);
    entry.def.active_policy.revision = event.at("revision").get<std::int64_t>();
    return;
  }

  if (type == "assignment") {
    apply_assignment(AssignmentRecord::from_json(event.at("record")), from_replay);
    return;
  }

  if (type == "reward") {
    const std::string assignment_id = event.at("assignment_id").get<std::string>();
    const double value = event.at("value").get<double>();
    const AssignmentRecord& rec = assignments_.at(assignment_id);
    MoocletEntry& entry = *mooclets_.at(rec.mooclet_id);
    rewards_[assignment_id] = value;

    const SubgroupKey key = rec.subgroup ? *rec.subgroup : SubgroupKey{};
    SubgroupState& sg = ensure_subgroup(entry, key);
    ensure_arm(sg, rec.version_id, entry.policy).add_reward(value);
    if (entry.policy.kind == PolicyKind::proportional_contextual &&
        entry.policy.per_event_rebalance) {
      recompute_weights(entry, sg);
    }
    if (event.contains("value_event") && !event.at("value_event").is_null()) {
      ValueEvent ev = ValueEvent::from_json(event.at("value_event"));
      ev.sequence_no = seq;
      store_.record(std::move(ev));
    }
    return;
  }

  fail(Errc::invalid_argument, "unknown event type '" + type + "'");
}

void Engine::apply_assignment(AssignmentRecord rec, bool from_replay) {
  MoocletEntry& entry = *mooclets_.at(rec.mooclet_id);
  if (rec.subgroup) {
    SubgroupState& sg = ensure_subgroup(entry, *rec.subgroup);
    for (const auto& v : entry.def.versions) ensure_arm(sg, v.id, entry.policy);
    if (entry.policy.kind == PolicyKind::proportional_contextual && !sg.weights_initialized) {
      const double p = 1.0 / static_cast<double>(entry.def.versions.size());
      for (const auto& v : entry.def.versions) sg.weights[v.id] = p;
      sg.weights_initialized = true;
    }
  }
  if (entry.policy.sticky) {
    entry.sticky[sticky_key(rec.learner_id, rec.wave)] = rec.assignment_id;
  }
  if (from_replay) entry.rng.advance_to(rec.rng_draws_after());
  assignment_order_.push_back(rec.assignment_id);
  assignments_.emplace(rec.assignment_id, std::move(rec));
}

json Engine::response_for(const json& event) const {
  const std::string type = event.at("type").get<std::string>();
  const std::int64_t seq = event.at("seq").get<std::int64_t>();

  if (type == "register_variable") {
    return json{{"variable", event.at("def").at("name")}, {"sequence_no", seq}};
  }
  if (type == "value") {
    return json{{"sequence_no", seq}};
  }
  if (type == "create_mooclet") {
    json out = event.at("mooclet");
    out["sequence_no"] = seq;
    return out;
  }
  if (type == "add_version") {
    json out = event.at("version");
    out["mooclet_id"] = event.at("mooclet_id");
    out["sequence_no"] = seq;
    return out;
  }
  if (type == "set_policy") {
    return json{{"mooclet_id", event.at("mooclet_id")},
                {"revision", event.at("policy").at("revision")},
                {"sequence_no", seq}};
  }
  if (type == "rebalance") {
    const MoocletEntry& entry = *mooclets_.at(event.at("mooclet_id").get<std::string>());
    json weights = json::object();
    for (const auto& [skey, sg] : entry.state) {
      if (sg.weights_initialized) weights[skey] = sg.weights;
    }
    return json{{"mooclet_id", event.at("mooclet_id")},
                {"revision", event.at("revision")},
                {"weights", weights},
                {"sequence_no", seq}};
  }
  if (type == "assignment") {
    const json& rec = event.at("record");
    const MoocletEntry& entry = *mooclets_.at(rec.at("mooclet_id").get<std::string>());
    const Version* version = entry.def.find_version(rec.at("version_id").get<std::string>());
    return json{{"assignment_id", rec.at("assignment_id")},
                {"version_id", rec.at("version_id")},
                {"payload", version ? version->payload : json()},
                {"sticky_repeat", false},
                {"sequence_no", seq}};
  }
  if (type == "reward") {
    return json{{"assignment_id", event.at("assignment_id")},
                {"value", event.at("value")},
                {"sequence_no", seq}};
  }
  return json::object();
}

json Engine::commit(json event, const std::string& idem_key) {
  std::lock_guard lock(state_mu_);
  if (!idem_key.empty()) {
    auto it = idempotency_.find(idem_key);
    if (it != idempotency_.end()) return it->second;  // replayed request
  }

  validate_event(event);

  const std::int64_t seq = log_.reserve_seq();
  event["seq"] = seq;
  const std::string type = event.at("type").get<std::string>();
  if (type == "assignment") {
    event["record"]["assignment_id"] = "a" + std::to_string(seq);
    event["record"]["sequence_no"] = seq;
  }
  if (!idem_key.empty()) event["idem"] = idem_key;

  try {
    log_.write(event);  // durable before any state change or response
  } catch (...) {
    log_.set_last_seq(seq - 1);  // nothing happened
    throw;
  }
  apply_event(event, /*from_replay=*/false);

  json response = response_for(event);
  if (!idem_key.empty()) idempotency_[idem_key] = response;

  ++events_since_snapshot_;
  maybe_snapshot_locked();
  return response;
}

void Engine::replay_from(const std::vector<json>& events) {
  std::lock_guard lock(state_mu_);
  for (const auto& event : events) {
    apply_event(event, /*from_replay=*/true);
    if (event.contains("idem")) {
      idempotency_[event.at("idem").get<std::string>()] = response_for(event);
    }
  }
}

void Engine::maybe_snapshot_locked() {
  if (!log_.persistent() || config_.snapshot_interval <= 0) return;
  if (events_since_snapshot_ < config_.snapshot_interval) return;
  events_since_snapshot_ = 0;
  const std::string path =
      (fs::path(data_dir_) / ("snapshot-" + std::to_string(log_.last_seq()) + ".json")).string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    std::cerr << "warning: cannot write snapshot " << path << "\n";
    return;
  }
  out << export_state_locked().dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Mutating operations

json Engine::register_variable(const json& def_body, const std::string& idem_key) {
  VariableDef def = VariableDef::from_json(def_body);
  return commit(json{{"type", "register_variable"}, {"def", def.to_json()}}, idem_key);
}

json Engine::record_value(const json& event_body, const std::string& idem_key) {
  ValueEvent ev;
  ev.learner_id = event_body.at("learner_id").get<std::string>();
  ev.variable = event_body.at("variable").get<std::string>();
  ev.value = Value::from_json(event_body.at("value"));
  ev.timestamp = event_body.contains("timestamp")
                     ? event_body.at("timestamp").get<std::int64_t>()
                     : now();
  return commit(json{{"type", "value"}, {"event", ev.to_json()}}, idem_key);
}

json Engine::create_mooclet(const json& body, const std::string& idem_key) {
  Mooclet def;
  def.name = body.value("name", "");
  def.created_at = now();
  int counter = 0;
  for (const auto& vj : body.value("versions", json::array())) {
    Version v;
    if (vj.is_string()) {
      v.id = vj.get<std::string>();
      v.label = v.id;
    } else {
      v.id = vj.value("id", "v" + std::to_string(counter + 1));
      v.label = vj.value("label", v.id);
      v.payload = vj.value("payload", json());
    }
    def.versions.push_back(std::move(v));
    ++counter;
  }
  json policy_body = body.value("policy", json{{"kind", "uniform_random"}});
  if (!policy_body.contains("config")) policy_body["config"] = json::object();
  def.active_policy = PolicyRef{policy_kind_from_name(policy_body.at("kind").get<std::string>()),
                                policy_body.at("config"), 0};

  // The id comes from the event's sequence number so it is unique and replay
  // stable; reserve it inside commit via a placeholder.
  json event{{"type", "create_mooclet"},
             {"mooclet", def.to_json()},
             {"outcome_variable", body.value("outcome_variable", "")}};

  std::lock_guard lock(state_mu_);
  if (!idem_key.empty()) {
    auto it = idempotency_.find(idem_key);
    if (it != idempotency_.end()) return it->second;
  }
  const std::int64_t seq = log_.reserve_seq();
  event["seq"] = seq;
  event["mooclet"]["id"] = "m" + std::to_string(seq);
  if (!idem_key.empty()) event["idem"] = idem_key;
  validate_event(event);
  log_.write(event);
  apply_event(event, false);
  json response = response_for(event);
  if (!idem_key.empty()) idempotency_[idem_key] = response;
  ++events_since_snapshot_;
  maybe_snapshot_locked();
  return response;
}

json Engine::add_version(const std::string& mooclet_id, const json& body,
                         const std::string& idem_key) {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard mooclet_lock(entry->mu);
  Version v;
  v.id = body.value("id", "v" + std::to_string(entry->def.versions.size() + 1));
  v.label = body.value("label", v.id);
  v.payload = body.value("payload", json());
  return commit(json{{"type", "add_version"}, {"mooclet_id", mooclet_id}, {"version", v.to_json()}},
                idem_key);
}

json Engine::set_policy(const std::string& mooclet_id, const json& policy_body,
                        std::optional<std::int64_t> expected_revision,
                        const std::string& idem_key) {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard mooclet_lock(entry->mu);
  if (expected_revision && *expected_revision != entry->def.active_policy.revision) {
    fail(Errc::revision_conflict,
         "expected revision " + std::to_string(*expected_revision) + " but the policy is at " +
             std::to_string(entry->def.active_policy.revision));
  }
  json policy{{"kind", policy_body.at("kind")},
              {"config", policy_body.value("config", json::object())},
              {"revision", entry->def.active_policy.revision + 1}};
  return commit(json{{"type", "set_policy"}, {"mooclet_id", mooclet_id}, {"policy", policy}},
                idem_key);
}

json Engine::rebalance(const std::string& mooclet_id, const std::string& idem_key) {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard mooclet_lock(entry->mu);
  return commit(json{{"type", "rebalance"},
                     {"mooclet_id", mooclet_id},
                     {"revision", entry->def.active_policy.revision + 1}},
                idem_key);
}

json Engine::request_version(const std::string& mooclet_id, const std::string& learner_id,
                             const std::string& wave, std::optional<std::int64_t> timestamp) {
  if (learner_id.empty()) fail(Errc::invalid_argument, "learner id must be non-empty");
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard mooclet_lock(entry->mu);
  if (entry->def.versions.empty()) {
    fail(Errc::no_versions, "mooclet '" + mooclet_id + "' has no versions");
  }

  if (entry->policy.sticky) {
    auto it = entry->sticky.find(sticky_key(learner_id, wave));
    if (it != entry->sticky.end()) {
      std::lock_guard lock(state_mu_);
      const AssignmentRecord& rec = assignments_.at(it->second);
      const Version* version = entry->def.find_version(rec.version_id);
      return json{{"assignment_id", rec.assignment_id},
                  {"version_id", rec.version_id},
                  {"payload", version ? version->payload : json()},
                  {"sticky_repeat", true},
                  {"sequence_no", rec.sequence_no}};
    }
  }

  Profile profile;
  {
    std::lock_guard lock(state_mu_);
    profile = store_.learner_profile(learner_id);
  }
  const std::int64_t ts = timestamp ? *timestamp : now();
  const std::uint64_t draws_before = entry->rng.draws();
  Draft draft = decide(*entry, profile, learner_id, wave, ts);
  try {
    std::lock_guard lock(state_mu_);
    const std::int64_t seq = log_.reserve_seq();
    draft.record.assignment_id = "a" + std::to_string(seq);
    draft.record.sequence_no = seq;
    try {
      if (log_.persistent()) {
        log_.write(json{{"type", "assignment"}, {"record", draft.record.to_json()}, {"seq", seq}});
      } else {
        static const json kNoEvent;
        log_.write(kNoEvent);  // keeps fault injection honest in memory mode
      }
    } catch (...) {
      log_.set_last_seq(seq - 1);
      throw;
    }
    json response{{"assignment_id", draft.record.assignment_id},
                  {"version_id", draft.record.version_id},
                  {"payload", draft.payload},
                  {"sticky_repeat", false},
                  {"sequence_no", seq}};
    apply_assignment(std::move(draft.record), /*from_replay=*/false);
    ++events_since_snapshot_;
    maybe_snapshot_locked();
    return response;
  } catch (...) {
    // The decision never became durable; rewind the stream so a retry sees
    // the exact draws this attempt consumed.
    Rng rewound(entry->rng.seed());
    rewound.advance_to(draws_before);
    entry->rng = std::move(rewound);
    throw;
  }
}

json Engine::record_reward(const std::string& assignment_id, double value,
                           const std::string& idem_key,
                           std::optional<std::int64_t> timestamp) {
  AssignmentRecord rec;
  {
    std::lock_guard lock(state_mu_);
    if (!idem_key.empty()) {
      auto it = idempotency_.find(idem_key);
      if (it != idempotency_.end()) return it->second;
    }
    auto it = assignments_.find(assignment_id);
    if (it == assignments_.end()) {
      fail(Errc::unknown_assignment, "no assignment '" + assignment_id + "'");
    }
    rec = it->second;
  }
  MoocletEntry* entry = find_mooclet(rec.mooclet_id);
  std::lock_guard mooclet_lock(entry->mu);

  json event{{"type", "reward"}, {"assignment_id", assignment_id}, {"value", value}};
  if (!entry->outcome_variable.empty()) {
    ValueEvent ev;
    ev.learner_id = rec.learner_id;
    ev.variable = entry->outcome_variable;
    ev.value = Value::number(std::clamp(value, 0.0, 1.0));
    ev.timestamp = timestamp ? *timestamp : now();
    event["value_event"] = ev.to_json();
  } else {
    event["value_event"] = json();
  }
  return commit(std::move(event), idem_key);
}

json Engine::ingest_value_csv(std::istream& in) {
  std::vector<ValueEvent> events;
  {
    std::lock_guard lock(state_mu_);
    events = parse_value_csv(store_, in);
  }
  json last;
  for (const auto& ev : events) {
    last = commit(json{{"type", "value"}, {"event", ev.to_json()}}, {});
  }
  return json{{"ingested", events.size()},
              {"sequence_no", last.is_object() ? last.value("sequence_no", std::int64_t{0})
                                               : std::int64_t{0}}};
}

// ---------------------------------------------------------------------------
// Reads

json Engine::get_mooclet(const std::string& mooclet_id) const {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard lock(state_mu_);
  json out = entry->def.to_json();
  out["outcome_variable"] = entry->outcome_variable;
  return out;
}

json Engine::list_mooclets() const {
  std::lock_guard lock(state_mu_);
  json out = json::array();
  for (const auto& [id, entry] : mooclets_) {
    json m = entry->def.to_json();
    m["outcome_variable"] = entry->outcome_variable;
    out.push_back(std::move(m));
  }
  return out;
}

json Engine::list_variables() const {
  std::lock_guard lock(state_mu_);
  json out = json::array();
  for (const auto& def : store_.definitions()) out.push_back(def.to_json());
  return out;
}

json Engine::get_policy(const std::string& mooclet_id) const {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard lock(state_mu_);
  return entry->def.active_policy.to_json();
}

json Engine::stats(const std::string& mooclet_id) const {
  MoocletEntry* entry = find_mooclet(mooclet_id);
  std::lock_guard lock(state_mu_);
  json subgroups = json::array();
  for (const auto& [skey, sg] : entry->state) {
    json arms = json::array();
    for (const auto& [vid, arm] : sg.arms) arms.push_back(arm.to_json());
    json item{{"key", skey}, {"subgroup", sg.key.to_json()}, {"arms", arms}};
    item["weights"] = sg.weights_initialized ? json(sg.weights) : json();
    subgroups.push_back(std::move(item));
  }
  return json{{"mooclet_id", mooclet_id},
              {"policy", entry->def.active_policy.to_json()},
              {"subgroups", subgroups}};
}

json Engine::learner_profile_json(const std::string& learner_id) const {
  std::lock_guard lock(state_mu_);
  json out = json::object();
  for (const auto& [var, value] : store_.learner_profile(learner_id)) {
    out[var] = value.to_json();
  }
  return out;
}

std::vector<AssignmentRecord> Engine::assignment_records(const std::string& mooclet_id) const {
  std::lock_guard lock(state_mu_);
  std::vector<AssignmentRecord> out;
  for (const auto& id : assignment_order_) {
    const auto& rec = assignments_.at(id);
    if (mooclet_id.empty() || rec.mooclet_id == mooclet_id) out.push_back(rec);
  }
  return out;
}

std::optional<double> Engine::reward_for(const std::string& assignment_id) const {
  std::lock_guard lock(state_mu_);
  auto it = rewards_.find(assignment_id);
  if (it == rewards_.end()) return std::nullopt;
  return it->second;
}

json Engine::export_state() const {
  std::lock_guard lock(state_mu_);
  return export_state_locked();
}

json Engine::export_state_locked() const {
  json mooclets = json::array();
  for (const auto& [id, entry] : mooclets_) {
    json subgroups = json::array();
    for (const auto& [skey, sg] : entry->state) {
      json arms = json::array();
      for (const auto& [vid, arm] : sg.arms) arms.push_back(arm.to_json());
      subgroups.push_back(json{{"key", skey},
                               {"subgroup", sg.key.to_json()},
                               {"arms", arms},
                               {"weights", sg.weights},
                               {"weights_initialized", sg.weights_initialized}});
    }
    mooclets.push_back(json{{"def", entry->def.to_json()},
                            {"outcome_variable", entry->outcome_variable},
                            {"sticky", entry->sticky},
                            {"rng", json{{"seed", entry->rng.seed()}, {"draws", entry->rng.draws()}}},
                            {"subgroups", subgroups}});
  }

  json variables = json::array();
  for (const auto& def : store_.definitions()) variables.push_back(def.to_json());

  json assignments = json::array();
  for (const auto& id : assignment_order_) assignments.push_back(assignments_.at(id).to_json());

  json rewards = json::object();
  {
    std::map<std::string, double> sorted(rewards_.begin(), rewards_.end());
    for (const auto& [id, value] : sorted) rewards[id] = value;
  }

  return json{{"last_seq", log_.last_seq()},
              {"variables", variables},
              {"learners", store_.export_latest()},
              {"mooclets", mooclets},
              {"assignments", assignments},
              {"rewards", rewards},
              {"idempotency", idempotency_}};
}

void Engine::load_snapshot(const json& snapshot) {
  std::lock_guard lock(state_mu_);
  for (const auto& def : snapshot.at("variables")) {
    store_.register_variable(VariableDef::from_json(def));
  }
  for (const auto& [learner, cells] : snapshot.at("learners").items()) {
    for (const auto& [var, cell] : cells.items()) {
      ValueEvent ev;
      ev.learner_id = learner;
      ev.variable = var;
      ev.value = Value::from_json(cell.at("value"));
      ev.timestamp = cell.at("timestamp").get<std::int64_t>();
      ev.sequence_no = cell.at("sequence_no").get<std::int64_t>();
      store_.record(std::move(ev));
    }
  }
  for (const auto& m : snapshot.at("mooclets")) {
    Mooclet def = Mooclet::from_json(m.at("def"));
    const auto seed = m.at("rng").at("seed").get<std::uint64_t>();
    auto entry = std::make_unique<MoocletEntry>(def, seed);
    entry->rng.advance_to(m.at("rng").at("draws").get<std::uint64_t>());
    entry->outcome_variable = m.value("outcome_variable", "");
    entry->policy = parse_policy_runtime(m.at("def").at("active_policy"), entry->def);
    for (const auto& [key, value] : m.at("sticky").items()) {
      entry->sticky[key] = value.get<std::string>();
    }
    for (const auto& sgj : m.at("subgroups")) {
      SubgroupState sg;
      for (const auto& [var, val] : sgj.at("subgroup").items()) {
        sg.key.parts.emplace_back(var, val.get<std::string>());
      }
      for (const auto& armj : sgj.at("arms")) {
        ArmState arm = ArmState::from_json(armj);
        sg.arms.emplace(arm.version_id, std::move(arm));
      }
      for (const auto& [vid, w] : sgj.at("weights").items()) sg.weights[vid] = w.get<double>();
      sg.weights_initialized = sgj.at("weights_initialized").get<bool>();
      entry->state.emplace(sgj.at("key").get<std::string>(), std::move(sg));
    }
    id_by_name_[def.name] = def.id;
    mooclets_[def.id] = std::move(entry);
  }
  for (const auto& rj : snapshot.at("assignments")) {
    AssignmentRecord rec = AssignmentRecord::from_json(rj);
    assignment_order_.push_back(rec.assignment_id);
    assignments_.emplace(rec.assignment_id, std::move(rec));
  }
  for (const auto& [id, value] : snapshot.at("rewards").items()) {
    rewards_[id] = value.get<double>();
  }
  for (const auto& [key, response] : snapshot.at("idempotency").items()) {
    idempotency_[key] = response;
  }
}

void Engine::export_csv(std::ostream& out) const {
  std::lock_guard lock(state_mu_);
  out << "assignment_id,learner_id,mooclet_id,version_id,policy_kind,policy_revision,"
         "subgroup,wave,holdout,timestamp,propensity_chosen,propensity_estimated,"
         "reward,has_reward\n";
  for (const auto& id : assignment_order_) {
    const AssignmentRecord& rec = assignments_.at(id);
    auto reward_it = rewards_.find(id);
    const bool has_reward = reward_it != rewards_.end();
    double propensity = 0.0;
    auto p = rec.propensity.find(rec.version_id);
    if (p != rec.propensity.end()) propensity = p->second;
    out << rec.assignment_id << ',' << rec.learner_id << ',' << rec.mooclet_id << ','
        << rec.version_id << ',' << policy_kind_name(rec.policy_kind) << ','
        << rec.policy_revision << ',' << (rec.subgroup ? rec.subgroup->serialize() : "") << ','
        << rec.wave << ',' << (rec.holdout ? 1 : 0) << ',' << rec.timestamp << ','
        << propensity << ',' << (rec.propensity_estimated ? 1 : 0) << ','
        << (has_reward ? std::to_string(reward_it->second) : "") << ','
        << (has_reward ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Analysis

std::vector<OutcomeRow> Engine::outcome_rows(const std::string& mooclet_id,
                                             const std::vector<std::string>& group_vars) const {
  std::lock_guard lock(state_mu_);
  std::vector<OutcomeRow> rows;
  for (const auto& id : assignment_order_) {
    const AssignmentRecord& rec = assignments_.at(id);
    if (rec.mooclet_id != mooclet_id) continue;
    OutcomeRow row;
    if (!group_vars.empty()) {
      const Profile profile = store_.learner_profile(rec.learner_id);
      row.group = subgroup_from_profile(group_vars, profile).serialize();
    }
    row.condition = rec.version_id;
    auto reward_it = rewards_.find(id);
    if (reward_it != rewards_.end()) {
      row.has_reward = true;
      row.reward = reward_it->second;
    }
    auto p = rec.propensity.find(rec.version_id);
    row.propensity = p != rec.propensity.end() ? p->second : 0.0;
    row.propensity_estimated = rec.propensity_estimated;
    rows.push_back(std::move(row));
  }
  return rows;
}

json Engine::analysis_report(const json& request) const {
  const std::string mooclet_id = request.at("mooclet_id").get<std::string>();
  MoocletEntry* entry = find_mooclet(mooclet_id);
  const std::string kind = request.value("kind", "response_rates");

  std::vector<std::string> group_vars;
  if (kind == "interaction") {
    group_vars.push_back(request.at("characteristic").get<std::string>());
  } else {
    group_vars = request.value("group_by", std::vector<std::string>{});
  }
  auto rows = outcome_rows(mooclet_id, group_vars);

  json out{{"mooclet_id", mooclet_id}, {"kind", kind}};
  if (kind == "response_rates") {
    std::vector<std::string> conditions;
    {
      std::lock_guard lock(state_mu_);
      for (const auto& v : entry->def.versions) conditions.push_back(v.id);
    }
    json table = json::array();
    for (const auto& r : response_rates(rows, conditions)) {
      table.push_back(json{{"group", r.group},
                           {"condition", r.condition},
                           {"successes", r.successes},
                           {"trials", r.trials},
                           {"rate", r.rate ? json(*r.rate) : json()}});
    }
    out["rates"] = std::move(table);
    return out;
  }
  if (kind == "chi_square") {
    ContingencyTable table = outcome_table(rows);
    out["table"] = table.to_json();
    out["test"] = chi_square_independence(table).to_json();
    return out;
  }
  if (kind == "interaction") {
    out["characteristic"] = group_vars.front();
    out["result"] = interaction_scan(rows).to_json();
    return out;
  }
  if (kind == "ipw") {
    const bool allow_estimated = request.value("allow_estimated", false);
    json estimates = json::array();
    for (const auto& est : ipw_mean(rows, allow_estimated)) {
      estimates.push_back(json{{"condition", est.condition},
                               {"estimate", est.estimate},
                               {"std_error", est.std_error},
                               {"n_chosen", est.n_chosen}});
    }
    out["estimates"] = std::move(estimates);
    return out;
  }
  fail(Errc::invalid_argument, "unknown analysis kind '" + kind + "'");
}

}  // namespace mooclet
