/* Copyright 2026 the mooclet-engine authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C ABI for the mooclet engine: an adaptive experimentation core with
 * versioned content components, a per-learner variable store, hot-swappable
 * assignment policies (uniform / weighted / rule-based / Thompson-sampling /
 * proportional contextual), propensity-logged assignment, analysis, and a
 * simulation harness.
 *
 * Conventions:
 *   - Handles are opaque; every call returns a mooclet_status.
 *   - Payloads in and out are UTF-8 JSON documents.
 *   - Returned strings are heap-allocated; free them with
 *     mooclet_string_free().
 *   - On failure, mooclet_last_error() returns a thread-local message
 *     describing the most recent error on the calling thread.
 */

#ifndef MOOCLET_MOOCLET_H
#define MOOCLET_MOOCLET_H

#include <stdint.h>

#if defined(_WIN32)
#define MOOCLET_API __declspec(dllexport)
#else
#define MOOCLET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mooclet_engine mooclet_engine;

typedef enum mooclet_status {
  MOOCLET_OK = 0,
  MOOCLET_E_INVALID = 1,   /* bad argument or failed validation */
  MOOCLET_E_NOT_FOUND = 2, /* unknown mooclet / assignment */
  MOOCLET_E_CONFLICT = 3,  /* duplicate or stale revision */
  MOOCLET_E_PARSE = 4,     /* malformed JSON or policy text */
  MOOCLET_E_IO = 5,        /* storage failure */
  MOOCLET_E_INTERNAL = 6
} mooclet_status;

MOOCLET_API const char* mooclet_last_error(void);
MOOCLET_API void mooclet_string_free(char* s);

/* Opens (creating if needed) a persistent engine in data_dir and replays its
 * event log.  Pass NULL or "" as data_dir for a volatile in-memory engine.
 * config_json (optional, may be NULL): {"seed": u64, "snapshot_interval": n,
 * "bearer_token": "..."}. */
MOOCLET_API mooclet_status mooclet_engine_open(const char* data_dir,
                                               const char* config_json,
                                               mooclet_engine** out);
MOOCLET_API void mooclet_engine_close(mooclet_engine* engine);

/* --- mooclets and policies ------------------------------------------------ */

/* body: {"name", "versions": [{"id","label","payload"}...],
 *        "outcome_variable", "policy": {"kind","config"}} */
MOOCLET_API mooclet_status mooclet_create_mooclet(mooclet_engine* engine,
                                                  const char* body_json, char** out_json);
MOOCLET_API mooclet_status mooclet_add_version(mooclet_engine* engine, const char* mooclet_id,
                                               const char* body_json, char** out_json);
/* policy_json: {"kind","config"}; expected_revision < 0 skips the check. */
MOOCLET_API mooclet_status mooclet_set_policy(mooclet_engine* engine, const char* mooclet_id,
                                              const char* policy_json,
                                              int64_t expected_revision, char** out_json);
MOOCLET_API mooclet_status mooclet_get_policy(mooclet_engine* engine, const char* mooclet_id,
                                              char** out_json);
MOOCLET_API mooclet_status mooclet_get(mooclet_engine* engine, const char* mooclet_id,
                                       char** out_json);
MOOCLET_API mooclet_status mooclet_list(mooclet_engine* engine, char** out_json);
MOOCLET_API mooclet_status mooclet_rebalance(mooclet_engine* engine, const char* mooclet_id,
                                             char** out_json);
MOOCLET_API mooclet_status mooclet_stats(mooclet_engine* engine, const char* mooclet_id,
                                         char** out_json);

/* --- variable store -------------------------------------------------------- */

/* def: {"name","kind":"numeric|categorical|binary","categories",
 *       "source":"external|derived|outcome"} */
MOOCLET_API mooclet_status mooclet_register_variable(mooclet_engine* engine,
                                                     const char* def_json, char** out_json);
MOOCLET_API mooclet_status mooclet_list_variables(mooclet_engine* engine, char** out_json);
/* event: {"learner_id","variable","value","timestamp"?} */
MOOCLET_API mooclet_status mooclet_record_value(mooclet_engine* engine,
                                                const char* event_json, char** out_json);
/* CSV with header learner_id,variable,value,timestamp */
MOOCLET_API mooclet_status mooclet_ingest_csv(mooclet_engine* engine, const char* csv_path,
                                              char** out_json);
MOOCLET_API mooclet_status mooclet_learner_profile(mooclet_engine* engine,
                                                   const char* learner_id, char** out_json);

/* --- runtime --------------------------------------------------------------- */

/* Serves a version under the active policy (sticky per learner/wave by
 * default).  wave may be NULL. */
MOOCLET_API mooclet_status mooclet_request_version(mooclet_engine* engine,
                                                   const char* mooclet_id,
                                                   const char* learner_id, const char* wave,
                                                   char** out_json);
/* idempotency_key may be NULL. */
MOOCLET_API mooclet_status mooclet_record_reward(mooclet_engine* engine,
                                                 const char* assignment_id, double value,
                                                 const char* idempotency_key,
                                                 char** out_json);

/* --- analysis and export ---------------------------------------------------- */

/* request: {"mooclet_id","kind":"response_rates|chi_square|interaction|ipw",
 *           "group_by":[...], "characteristic":"...", "allow_estimated":bool} */
MOOCLET_API mooclet_status mooclet_analysis_report(mooclet_engine* engine,
                                                   const char* request_json, char** out_json);
MOOCLET_API mooclet_status mooclet_export_state(mooclet_engine* engine, char** out_json);
/* Writes the assignments x rewards join as CSV. */
MOOCLET_API mooclet_status mooclet_export_csv(mooclet_engine* engine, const char* csv_path);

/* --- service ---------------------------------------------------------------- */

/* Blocking HTTP server over this engine.  bearer_token may be NULL for no
 * auth.  Returns when the server stops. */
MOOCLET_API mooclet_status mooclet_serve(mooclet_engine* engine, const char* host, int port,
                                         const char* bearer_token);

/* --- simulation ------------------------------------------------------------- */

/* Runs a scenario document end to end through a fresh in-memory engine.
 * trace_path may be NULL. */
MOOCLET_API mooclet_status mooclet_sim_run(const char* scenario_json, const char* trace_path,
                                           char** out_report_json);
/* policies_json: JSON array of {"kind","config"}; the first is the baseline. */
MOOCLET_API mooclet_status mooclet_sim_compare(const char* scenario_json,
                                               const char* policies_json, int replications,
                                               int threads, char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* MOOCLET_MOOCLET_H */
