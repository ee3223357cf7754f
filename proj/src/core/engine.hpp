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

#ifndef MOOCLET_CORE_ENGINE_HPP
#define MOOCLET_CORE_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/assignment.hpp"
#include "core/event_log.hpp"
#include "core/jsonio.hpp"
#include "core/policy_dsl.hpp"
#include "core/records.hpp"
#include "core/rng.hpp"
#include "core/stats.hpp"
#include "core/types.hpp"
#include "core/variable_store.hpp"

namespace mooclet {

// Parsed, validated form of a policy config.
struct PolicyRuntime {
  PolicyKind kind = PolicyKind::uniform_random;
  bool sticky = true;
  // contextual kinds
  std::vector<std::string> subgroup_variables;
  double epsilon = -1.0;  // < 0 means the default 0.1 / n
  double smoothing_s0 = 1.0;
  double smoothing_t0 = 2.0;
  double prior_alpha = 1.0;
  double prior_beta = 1.0;
  double holdout_fraction = 0.0;
  bool per_event_rebalance = false;
  int thompson_resamples = 1000;
  // weighted_random
  WeightVector fixed_weights;
  // rule_based
  dsl::RuleSet rules;
  std::map<std::string, std::shared_ptr<PolicyRuntime>> delegates;

  double effective_epsilon(std::size_t n_versions) const;
};

struct EngineConfig {
  std::uint64_t seed = 0;
  std::int64_t snapshot_interval = 0;   // events between snapshots; 0 = off
  std::string bearer_token;             // empty = no auth (service layer)
  std::function<std::int64_t()> clock;  // defaults to wall clock millis
};

// Event-sourced state machine behind every interface (HTTP, C API, CLI,
// simulator).  Every mutation is validated, appended to the event log
// (durable before any response), then applied to memory; replaying the log
// from empty rebuilds the exact in-memory state.
class Engine {
 public:
  using Config = EngineConfig;

  // Opens (or creates) a persistent store in `data_dir` and replays the
  // existing log, loading the newest snapshot first when one exists.
  static std::unique_ptr<Engine> open(const std::string& data_dir, Config config = {});

  // Volatile engine with no persistence (used by the simulator and tests).
  static std::unique_ptr<Engine> in_memory(Config config = {});

  const Config& config() const { return config_; }
  const std::string& data_dir() const { return data_dir_; }

  // --- mutations (each returns the response document) -----------------------

  json create_mooclet(const json& body, const std::string& idem_key = {});
  json add_version(const std::string& mooclet_id, const json& body,
                   const std::string& idem_key = {});
  json set_policy(const std::string& mooclet_id, const json& policy_body,
                  std::optional<std::int64_t> expected_revision,
                  const std::string& idem_key = {});
  json register_variable(const json& def_body, const std::string& idem_key = {});
  json record_value(const json& event_body, const std::string& idem_key = {});
  json record_reward(const std::string& assignment_id, double value,
                     const std::string& idem_key = {},
                     std::optional<std::int64_t> timestamp = std::nullopt);
  json rebalance(const std::string& mooclet_id, const std::string& idem_key = {});

  // Serves a version for a learner under the active policy.  Sticky by
  // default: repeated calls for the same (learner, mooclet, wave) return the
  // original assignment without drawing again.
  json request_version(const std::string& mooclet_id, const std::string& learner_id,
                       const std::string& wave = "",
                       std::optional<std::int64_t> timestamp = std::nullopt);

  // Bulk CSV ingestion: header learner_id,variable,value,timestamp.
  json ingest_value_csv(std::istream& in);

  // --- reads -----------------------------------------------------------------

  json get_mooclet(const std::string& mooclet_id) const;
  json list_mooclets() const;
  json list_variables() const;
  json get_policy(const std::string& mooclet_id) const;
  json stats(const std::string& mooclet_id) const;
  json learner_profile_json(const std::string& learner_id) const;

  // Canonical full-state document; byte-identical across a replay of the
  // same log.  Also the snapshot format.
  json export_state() const;

  // assignment x reward join, one CSV row per assignment.
  void export_csv(std::ostream& out) const;

  // Analysis over this engine's assignment and reward history.
  // request: {"mooclet_id", "kind": response_rates|chi_square|interaction|ipw,
  //           "group_by": [...], "characteristic": "...", "allow_estimated"}
  json analysis_report(const json& request) const;

  std::vector<AssignmentRecord> assignment_records(const std::string& mooclet_id) const;
  std::optional<double> reward_for(const std::string& assignment_id) const;

  std::int64_t last_sequence_no() const;

  // Fault injection: makes subsequent log appends fail (503 paths).
  void fail_log_writes_for_testing(bool fail);

  // Validates a policy body against a mooclet without installing it.
  // Returns the parsed kind name; throws on invalid configs and returns DSL
  // diagnostics through the error message.
  std::string check_policy_body(const std::string& mooclet_id, const json& policy_body) const;

 private:
  struct SubgroupState {
    SubgroupKey key;
    std::map<std::string, ArmState> arms;  // version id -> posterior counters
    WeightVector weights;                  // proportional kinds
    bool weights_initialized = false;
  };

  struct MoocletEntry {
    Mooclet def;
    PolicyRuntime policy;
    std::string outcome_variable;
    std::map<std::string, SubgroupState> state;  // serialized subgroup -> state
    std::map<std::string, std::string> sticky;   // learner \x1f wave -> assignment id
    Rng rng;
    mutable std::mutex mu;

    MoocletEntry(Mooclet d, std::uint64_t seed) : def(std::move(d)), rng(seed) {}
  };

  Engine(std::string data_dir, Config config);

  std::int64_t now() const { return config_.clock(); }

  // Commit pipeline: validate_event must not mutate; apply_event must not
  // fail after validate_event passed.  Both run under state_mu_.
  void validate_event(const json& event) const;
  void apply_event(const json& event, bool from_replay);
  void apply_assignment(AssignmentRecord rec, bool from_replay);
  json response_for(const json& event) const;

  // Validates, reserves a sequence number, writes, applies and returns the
  // response.  `event` is completed with "seq" (and assignment ids).
  json commit(json event, const std::string& idem_key);

  void replay_from(const std::vector<json>& events);
  void load_snapshot(const json& snapshot);
  void maybe_snapshot_locked();

  MoocletEntry* find_mooclet(const std::string& id) const;  // throws UnknownMooclet
  PolicyRuntime parse_policy_runtime(const json& policy_json, const Mooclet& def,
                                     bool allow_delegates = true) const;
  void seed_contextual_state(MoocletEntry& entry) const;
  void recompute_weights(MoocletEntry& entry, SubgroupState& sg) const;
  SubgroupState& ensure_subgroup(MoocletEntry& entry, const SubgroupKey& key) const;
  ArmState& ensure_arm(SubgroupState& sg, const std::string& version_id,
                       const PolicyRuntime& policy) const;

  struct Draft {
    AssignmentRecord record;
    json payload;
  };
  Draft decide(MoocletEntry& entry, const Profile& profile, const std::string& learner_id,
               const std::string& wave, std::int64_t timestamp) const;
  void decide_with(const PolicyRuntime& policy, MoocletEntry& entry, const Profile& profile,
                   AssignmentRecord& record) const;

  std::vector<OutcomeRow> outcome_rows(const std::string& mooclet_id,
                                       const std::vector<std::string>& group_vars) const;

  json export_state_locked() const;

  Config config_;
  std::string data_dir_;
  EventLog log_;

  mutable std::mutex state_mu_;
  std::map<std::string, std::unique_ptr<MoocletEntry>> mooclets_;
  std::map<std::string, std::string> id_by_name_;
  VariableStore store_;
  std::vector<std::string> assignment_order_;
  std::unordered_map<std::string, AssignmentRecord> assignments_;
  std::unordered_map<std::string, double> rewards_;
  std::map<std::string, json> idempotency_;
  std::int64_t events_since_snapshot_ = 0;
};

}  // namespace mooclet

#endif  // MOOCLET_CORE_ENGINE_HPP
