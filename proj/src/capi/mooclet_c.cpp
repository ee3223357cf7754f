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

#include "mooclet/mooclet.h"

#include <cstring>
#include <fstream>
#include <string>

#include "core/engine.hpp"
#include "core/error.hpp"
#include "core/service.hpp"
#include "core/sim.hpp"

namespace {

thread_local std::string g_last_error;

mooclet_status status_of(mooclet::Errc code) {
  using mooclet::Errc;
  switch (code) {
    case Errc::unknown_mooclet:
    case Errc::unknown_assignment:
      return MOOCLET_E_NOT_FOUND;
    case Errc::duplicate_name:
    case Errc::duplicate_variable:
    case Errc::duplicate_reward:
    case Errc::revision_conflict:
    case Errc::duplicate_request:
      return MOOCLET_E_CONFLICT;
    case Errc::dsl_syntax:
      return MOOCLET_E_PARSE;
    case Errc::io_error:
      return MOOCLET_E_IO;
    default:
      return MOOCLET_E_INVALID;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mooclet::Engine* unwrap(mooclet_engine* engine) {
  return reinterpret_cast<mooclet::Engine*>(engine);
}

mooclet::json parse_json(const char* text, const char* what) {
  if (!text) mooclet::fail(mooclet::Errc::invalid_argument, std::string(what) + " is null");
  mooclet::json j = mooclet::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    mooclet::fail(mooclet::Errc::invalid_argument, std::string(what) + " is not valid JSON");
  }
  return j;
}

template <typename Fn>
mooclet_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MOOCLET_OK;
  } catch (const mooclet::Error& e) {
    g_last_error = std::string(e.code_name()) + ": " + e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MOOCLET_E_INTERNAL;
  }
}

void emit(char** out_json, const mooclet::json& value) {
  if (out_json) *out_json = dup_string(value.dump());
}

}  // namespace

extern "C" {

const char* mooclet_last_error(void) { return g_last_error.c_str(); }

void mooclet_string_free(char* s) { ::free(s); }

mooclet_status mooclet_engine_open(const char* data_dir, const char* config_json,
                                   mooclet_engine** out) {
  return guarded([&] {
    if (!out) mooclet::fail(mooclet::Errc::invalid_argument, "out handle is null");
    mooclet::Engine::Config config;
    if (config_json && *config_json) {
      mooclet::json j = parse_json(config_json, "config");
      config.seed = j.value("seed", std::uint64_t{0});
      config.snapshot_interval = j.value("snapshot_interval", std::int64_t{0});
      config.bearer_token = j.value("bearer_token", "");
    }
    std::unique_ptr<mooclet::Engine> engine =
        (data_dir && *data_dir) ? mooclet::Engine::open(data_dir, std::move(config))
                                : mooclet::Engine::in_memory(std::move(config));
    *out = reinterpret_cast<mooclet_engine*>(engine.release());
  });
}

void mooclet_engine_close(mooclet_engine* engine) { delete unwrap(engine); }

mooclet_status mooclet_create_mooclet(mooclet_engine* engine, const char* body_json,
                                      char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->create_mooclet(parse_json(body_json, "body"))); });
}

mooclet_status mooclet_add_version(mooclet_engine* engine, const char* mooclet_id,
                                   const char* body_json, char** out_json) {
  return guarded([&] {
    emit(out_json, unwrap(engine)->add_version(mooclet_id ? mooclet_id : "",
                                               parse_json(body_json, "body")));
  });
}

mooclet_status mooclet_set_policy(mooclet_engine* engine, const char* mooclet_id,
                                  const char* policy_json, int64_t expected_revision,
                                  char** out_json) {
  return guarded([&] {
    std::optional<std::int64_t> expected;
    if (expected_revision >= 0) expected = expected_revision;
    emit(out_json, unwrap(engine)->set_policy(mooclet_id ? mooclet_id : "",
                                              parse_json(policy_json, "policy"), expected));
  });
}

mooclet_status mooclet_get_policy(mooclet_engine* engine, const char* mooclet_id,
                                  char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->get_policy(mooclet_id ? mooclet_id : "")); });
}

mooclet_status mooclet_get(mooclet_engine* engine, const char* mooclet_id, char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->get_mooclet(mooclet_id ? mooclet_id : "")); });
}

mooclet_status mooclet_list(mooclet_engine* engine, char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->list_mooclets()); });
}

mooclet_status mooclet_rebalance(mooclet_engine* engine, const char* mooclet_id,
                                 char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->rebalance(mooclet_id ? mooclet_id : "")); });
}

mooclet_status mooclet_stats(mooclet_engine* engine, const char* mooclet_id, char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->stats(mooclet_id ? mooclet_id : "")); });
}

mooclet_status mooclet_register_variable(mooclet_engine* engine, const char* def_json,
                                         char** out_json) {
  return guarded(
      [&] { emit(out_json, unwrap(engine)->register_variable(parse_json(def_json, "def"))); });
}

mooclet_status mooclet_list_variables(mooclet_engine* engine, char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->list_variables()); });
}

mooclet_status mooclet_record_value(mooclet_engine* engine, const char* event_json,
                                    char** out_json) {
  return guarded(
      [&] { emit(out_json, unwrap(engine)->record_value(parse_json(event_json, "event"))); });
}

mooclet_status mooclet_ingest_csv(mooclet_engine* engine, const char* csv_path,
                                  char** out_json) {
  return guarded([&] {
    if (!csv_path) mooclet::fail(mooclet::Errc::invalid_argument, "csv_path is null");
    std::ifstream in(csv_path);
    if (!in) mooclet::fail(mooclet::Errc::io_error, std::string("cannot open ") + csv_path);
    emit(out_json, unwrap(engine)->ingest_value_csv(in));
  });
}

mooclet_status mooclet_learner_profile(mooclet_engine* engine, const char* learner_id,
                                       char** out_json) {
  return guarded([&] {
    emit(out_json, unwrap(engine)->learner_profile_json(learner_id ? learner_id : ""));
  });
}

mooclet_status mooclet_request_version(mooclet_engine* engine, const char* mooclet_id,
                                       const char* learner_id, const char* wave,
                                       char** out_json) {
  return guarded([&] {
    emit(out_json, unwrap(engine)->request_version(mooclet_id ? mooclet_id : "",
                                                   learner_id ? learner_id : "",
                                                   wave ? wave : ""));
  });
}

mooclet_status mooclet_record_reward(mooclet_engine* engine, const char* assignment_id,
                                     double value, const char* idempotency_key,
                                     char** out_json) {
  return guarded([&] {
    emit(out_json, unwrap(engine)->record_reward(assignment_id ? assignment_id : "", value,
                                                 idempotency_key ? idempotency_key : ""));
  });
}

mooclet_status mooclet_analysis_report(mooclet_engine* engine, const char* request_json,
                                       char** out_json) {
  return guarded([&] {
    emit(out_json, unwrap(engine)->analysis_report(parse_json(request_json, "request")));
  });
}

mooclet_status mooclet_export_state(mooclet_engine* engine, char** out_json) {
  return guarded([&] { emit(out_json, unwrap(engine)->export_state()); });
}

mooclet_status mooclet_export_csv(mooclet_engine* engine, const char* csv_path) {
  return guarded([&] {
    if (!csv_path) mooclet::fail(mooclet::Errc::invalid_argument, "csv_path is null");
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) mooclet::fail(mooclet::Errc::io_error, std::string("cannot write ") + csv_path);
    unwrap(engine)->export_csv(out);
  });
}

mooclet_status mooclet_serve(mooclet_engine* engine, const char* host, int port,
                             const char* bearer_token) {
  return guarded([&] {
    mooclet::HttpService service(*unwrap(engine), bearer_token ? bearer_token : "");
    if (!service.listen(host ? host : "127.0.0.1", port)) {
      mooclet::fail(mooclet::Errc::io_error, "failed to bind HTTP listener");
    }
  });
}

mooclet_status mooclet_sim_run(const char* scenario_json, const char* trace_path,
                               char** out_report_json) {
  return guarded([&] {
    mooclet::sim::Scenario scenario =
        mooclet::sim::Scenario::parse(parse_json(scenario_json, "scenario"));
    std::optional<std::string> trace;
    if (trace_path && *trace_path) trace = trace_path;
    emit(out_report_json, mooclet::sim::run_scenario(scenario, trace).report);
  });
}

mooclet_status mooclet_sim_compare(const char* scenario_json, const char* policies_json,
                                   int replications, int threads, char** out_report_json) {
  return guarded([&] {
    mooclet::sim::Scenario scenario =
        mooclet::sim::Scenario::parse(parse_json(scenario_json, "scenario"));
    mooclet::json policies = parse_json(policies_json, "policies");
    if (!policies.is_array()) {
      mooclet::fail(mooclet::Errc::invalid_argument, "policies must be a JSON array");
    }
    std::vector<mooclet::json> list(policies.begin(), policies.end());
    emit(out_report_json, mooclet::sim::compare_policies(scenario, list, replications, threads));
  });
}

}  // extern "C"
