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
//
// Admin CLI for the mooclet engine.  Talks to the engine exclusively through
// the C API in mooclet/mooclet.h.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mooclet/mooclet.h"

namespace {

using nlohmann::json;

struct EngineHandle {
  mooclet_engine* engine = nullptr;
  ~EngineHandle() {
    if (engine) mooclet_engine_close(engine);
  }
};

[[noreturn]] void die(const std::string& context) {
  std::cerr << "error: " << context;
  const char* detail = mooclet_last_error();
  if (detail && *detail) std::cerr << " (" << detail << ")";
  std::cerr << "\n";
  std::exit(1);
}

void check(mooclet_status status, const std::string& context) {
  if (status != MOOCLET_OK) die(context);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  mooclet_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

mooclet_engine* open_engine(EngineHandle& handle, const std::string& data_dir,
                            std::uint64_t seed, std::int64_t snapshot_interval) {
  json config{{"seed", seed}, {"snapshot_interval", snapshot_interval}};
  check(mooclet_engine_open(data_dir.c_str(), config.dump().c_str(), &handle.engine),
        "cannot open engine at " + data_dir);
  return handle.engine;
}

void print_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    std::cout << text << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

void render_rates_text(const json& report) {
  std::cout << std::left << std::setw(28) << "group" << std::setw(14) << "condition"
            << std::right << std::setw(10) << "successes" << std::setw(9) << "trials"
            << std::setw(12) << "rate" << "\n";
  for (const auto& row : report.at("rates")) {
    std::ostringstream rate;
    if (row.at("rate").is_null()) {
      rate << "undefined";
    } else {
      rate << std::fixed << std::setprecision(4) << row.at("rate").get<double>();
    }
    std::cout << std::left << std::setw(28) << row.at("group").get<std::string>()
              << std::setw(14) << row.at("condition").get<std::string>() << std::right
              << std::setw(10) << row.at("successes").get<double>() << std::setw(9)
              << row.at("trials").get<std::int64_t>() << std::setw(12) << rate.str() << "\n";
  }
}

void render_rates_csv(const json& report) {
  std::cout << "group,condition,successes,trials,rate\n";
  for (const auto& row : report.at("rates")) {
    std::cout << row.at("group").get<std::string>() << ','
              << row.at("condition").get<std::string>() << ','
              << row.at("successes").get<double>() << ','
              << row.at("trials").get<std::int64_t>() << ',';
    if (!row.at("rate").is_null()) std::cout << row.at("rate").get<double>();
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mooclet - adaptive experimentation engine"};
  app.require_subcommand(1);

  std::string data_dir = "./mooclet-data";
  std::uint64_t seed = 0;
  std::int64_t snapshot_interval = 0;
  app.add_option("--data", data_dir, "engine data directory")->envname("MOOCLET_DATA");
  app.add_option("--seed", seed, "engine RNG seed (default 0)");
  app.add_option("--snapshot-interval", snapshot_interval,
                 "events between state snapshots (0 = off)");

  // mooclet create
  auto* create = app.add_subcommand("create", "create a mooclet");
  std::string create_name;
  std::vector<std::string> create_versions;
  std::string create_outcome;
  create->add_option("--name", create_name, "mooclet name")->required();
  create->add_option("--version", create_versions, "version id (repeatable, id or id=label)");
  create->add_option("--outcome-variable", create_outcome,
                     "registered variable rewards are written to");

  // mooclet versions add
  auto* versions = app.add_subcommand("versions", "manage versions");
  auto* versions_add = versions->add_subcommand("add", "add a version");
  std::string va_mooclet, va_id, va_label, va_payload;
  versions_add->add_option("mooclet", va_mooclet, "mooclet id")->required();
  versions_add->add_option("--id", va_id, "version id");
  versions_add->add_option("--label", va_label, "display label");
  versions_add->add_option("--payload", va_payload, "opaque JSON payload");

  // mooclet policy set|show
  auto* policy = app.add_subcommand("policy", "manage the active policy");
  auto* policy_set = policy->add_subcommand("set", "swap the active policy");
  std::string ps_mooclet, ps_file, ps_kind, ps_config;
  std::int64_t ps_expected = -1;
  policy_set->add_option("mooclet", ps_mooclet, "mooclet id")->required();
  policy_set->add_option("--file", ps_file, "rule policy file (.mpol)");
  policy_set->add_option("--kind", ps_kind, "policy kind");
  policy_set->add_option("--config", ps_config, "policy config JSON");
  policy_set->add_option("--expected-revision", ps_expected,
                         "fail with a conflict unless the policy is at this revision");
  auto* policy_show = policy->add_subcommand("show", "print the active policy");
  std::string psh_mooclet;
  policy_show->add_option("mooclet", psh_mooclet, "mooclet id")->required();

  // mooclet vars register|ingest
  auto* vars = app.add_subcommand("vars", "manage the variable store");
  auto* vars_register = vars->add_subcommand("register", "register a variable");
  std::string vr_def, vr_name, vr_kind = "numeric", vr_source = "external";
  std::vector<std::string> vr_categories;
  vars_register->add_option("--def", vr_def, "full definition JSON");
  vars_register->add_option("--name", vr_name, "variable name");
  vars_register->add_option("--kind", vr_kind, "numeric|categorical|binary");
  vars_register->add_option("--category", vr_categories, "category label (repeatable)");
  vars_register->add_option("--source", vr_source, "external|derived|outcome");
  auto* vars_ingest = vars->add_subcommand("ingest", "bulk-load values from CSV");
  std::string vi_path;
  vars_ingest->add_option("csv", vi_path, "CSV file (learner_id,variable,value,timestamp)")
      ->required();

  // mooclet stats
  auto* stats = app.add_subcommand("stats", "arm state and analysis reports");
  std::string st_mooclet, st_kind = "arms", st_characteristic, st_format = "text";
  std::vector<std::string> st_group_by;
  bool st_allow_estimated = false;
  stats->add_option("mooclet", st_mooclet, "mooclet id")->required();
  stats->add_option("--report", st_kind,
                    "arms|response_rates|chi_square|interaction|ipw (default arms)");
  stats->add_option("--group-by", st_group_by, "group-by variable (repeatable)");
  stats->add_option("--characteristic", st_characteristic,
                    "stratifying variable for --report interaction");
  stats->add_flag("--allow-estimated", st_allow_estimated,
                  "let IPW use Thompson-estimated propensities");
  stats->add_option("--format", st_format, "text|json|csv (default text)");

  // mooclet export
  auto* export_cmd = app.add_subcommand("export", "dump logs and the assignment/reward join");
  std::string ex_out = ".";
  export_cmd->add_option("--out", ex_out, "output directory");

  // mooclet serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string sv_host = "127.0.0.1", sv_token;
  int sv_port = 8080;
  serve->add_option("--host", sv_host, "listen address");
  serve->add_option("--port", sv_port, "listen port");
  serve->add_option("--token", sv_token, "bearer token required on every request");

  // mooclet sim run|compare
  auto* sim = app.add_subcommand("sim", "synthetic-population simulation");
  auto* sim_run = sim->add_subcommand("run", "run one scenario");
  std::string sr_scenario, sr_trace, sr_report;
  std::int64_t sr_seed = -1;
  sim_run->add_option("scenario", sr_scenario, "scenario JSON file")->required();
  sim_run->add_option("--seed", sr_seed, "override the scenario seed");
  sim_run->add_option("--out", sr_trace, "write the assignment trace (JSONL)");
  sim_run->add_option("--report", sr_report, "write the report JSON to a file");
  auto* sim_compare = sim->add_subcommand("compare", "compare policies on one scenario");
  std::string sc_scenario, sc_policies;
  int sc_reps = 20, sc_threads = 1;
  sim_compare->add_option("scenario", sc_scenario, "scenario JSON file")->required();
  sim_compare->add_option("--policies", sc_policies,
                          "JSON file with an array of policies (first = baseline)")
      ->required();
  sim_compare->add_option("--reps", sc_reps, "replications per policy");
  sim_compare->add_option("--threads", sc_threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  if (create->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    json versions_json = json::array();
    for (const auto& spec : create_versions) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) {
        versions_json.push_back(json{{"id", spec}});
      } else {
        versions_json.push_back(json{{"id", spec.substr(0, eq)}, {"label", spec.substr(eq + 1)}});
      }
    }
    json body{{"name", create_name}, {"versions", versions_json}};
    if (!create_outcome.empty()) body["outcome_variable"] = create_outcome;
    char* out = nullptr;
    check(mooclet_create_mooclet(engine, body.dump().c_str(), &out), "create failed");
    print_json(take(out));
    return 0;
  }

  if (versions_add->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    json body = json::object();
    if (!va_id.empty()) body["id"] = va_id;
    if (!va_label.empty()) body["label"] = va_label;
    if (!va_payload.empty()) {
      json payload = json::parse(va_payload, nullptr, false);
      body["payload"] = payload.is_discarded() ? json(va_payload) : payload;
    }
    char* out = nullptr;
    check(mooclet_add_version(engine, va_mooclet.c_str(), body.dump().c_str(), &out),
          "versions add failed");
    print_json(take(out));
    return 0;
  }

  if (policy_set->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    json body;
    if (!ps_file.empty()) {
      body = json{{"kind", "rule_based"}, {"config", json{{"rules", read_file(ps_file)}}}};
    } else if (!ps_kind.empty()) {
      json config = json::object();
      if (!ps_config.empty()) {
        config = json::parse(ps_config, nullptr, false);
        if (config.is_discarded()) die("--config is not valid JSON");
      }
      body = json{{"kind", ps_kind}, {"config", config}};
    } else {
      die("policy set needs --file or --kind");
    }
    char* out = nullptr;
    check(mooclet_set_policy(engine, ps_mooclet.c_str(), body.dump().c_str(), ps_expected, &out),
          "policy set failed");
    print_json(take(out));
    return 0;
  }

  if (policy_show->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    char* out = nullptr;
    check(mooclet_get_policy(engine, psh_mooclet.c_str(), &out), "policy show failed");
    const std::string text = take(out);
    json policy = json::parse(text, nullptr, false);
    if (!policy.is_discarded() && policy.value("kind", "") == "rule_based") {
      std::cout << policy.at("config").value("rules", "") << "\n";
      std::cout << "# kind=rule_based revision=" << policy.value("revision", 0) << "\n";
    } else {
      print_json(text);
    }
    return 0;
  }

  if (vars_register->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    json def;
    if (!vr_def.empty()) {
      def = json::parse(vr_def, nullptr, false);
      if (def.is_discarded()) die("--def is not valid JSON");
    } else {
      if (vr_name.empty()) die("vars register needs --def or --name");
      def = json{{"name", vr_name}, {"kind", vr_kind}, {"source", vr_source}};
      if (!vr_categories.empty()) def["categories"] = vr_categories;
    }
    char* out = nullptr;
    check(mooclet_register_variable(engine, def.dump().c_str(), &out), "vars register failed");
    print_json(take(out));
    return 0;
  }

  if (vars_ingest->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    char* out = nullptr;
    check(mooclet_ingest_csv(engine, vi_path.c_str(), &out), "vars ingest failed");
    print_json(take(out));
    return 0;
  }

  if (stats->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    char* out = nullptr;
    if (st_kind == "arms") {
      check(mooclet_stats(engine, st_mooclet.c_str(), &out), "stats failed");
      print_json(take(out));
      return 0;
    }
    json request{{"mooclet_id", st_mooclet}, {"kind", st_kind}};
    if (!st_group_by.empty()) request["group_by"] = st_group_by;
    if (!st_characteristic.empty()) request["characteristic"] = st_characteristic;
    if (st_allow_estimated) request["allow_estimated"] = true;
    check(mooclet_analysis_report(engine, request.dump().c_str(), &out), "stats failed");
    const std::string text = take(out);
    if (st_kind == "response_rates" && st_format != "json") {
      json report = json::parse(text);
      if (st_format == "csv") {
        render_rates_csv(report);
      } else {
        render_rates_text(report);
      }
    } else {
      print_json(text);
    }
    return 0;
  }

  if (export_cmd->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    const std::string csv_path = ex_out + "/assignments.csv";
    check(mooclet_export_csv(engine, csv_path.c_str()), "export failed");
    // The event log itself is the canonical JSONL export; copy it verbatim.
    {
      std::ifstream in(data_dir + "/events.jsonl", std::ios::binary);
      std::ofstream out_log(ex_out + "/events.jsonl", std::ios::trunc | std::ios::binary);
      if (in && out_log) out_log << in.rdbuf();
    }
    char* out = nullptr;
    check(mooclet_export_state(engine, &out), "export failed");
    std::ofstream state(ex_out + "/state.json", std::ios::trunc);
    state << take(out) << "\n";
    std::cout << "wrote " << csv_path << ", " << ex_out << "/events.jsonl, " << ex_out
              << "/state.json\n";
    return 0;
  }

  if (serve->parsed()) {
    EngineHandle handle;
    auto* engine = open_engine(handle, data_dir, seed, snapshot_interval);
    std::cerr << "listening on " << sv_host << ":" << sv_port << " (data: " << data_dir << ")\n";
    check(mooclet_serve(engine, sv_host.c_str(), sv_port, sv_token.c_str()), "serve failed");
    return 0;
  }

  if (sim_run->parsed()) {
    json scenario = json::parse(read_file(sr_scenario), nullptr, false);
    if (scenario.is_discarded()) die("scenario file is not valid JSON");
    if (sr_seed >= 0) scenario["seed"] = sr_seed;
    char* out = nullptr;
    check(mooclet_sim_run(scenario.dump().c_str(), sr_trace.empty() ? nullptr : sr_trace.c_str(),
                          &out),
          "sim run failed");
    const std::string report = take(out);
    if (!sr_report.empty()) {
      std::ofstream f(sr_report, std::ios::trunc);
      f << report << "\n";
    }
    print_json(report);
    return 0;
  }

  if (sim_compare->parsed()) {
    json scenario = json::parse(read_file(sc_scenario), nullptr, false);
    if (scenario.is_discarded()) die("scenario file is not valid JSON");
    json policies = json::parse(read_file(sc_policies), nullptr, false);
    if (policies.is_discarded()) die("policies file is not valid JSON");
    char* out = nullptr;
    check(mooclet_sim_compare(scenario.dump().c_str(), policies.dump().c_str(), sc_reps,
                              sc_threads, &out),
          "sim compare failed");
    print_json(take(out));
    return 0;
  }

  std::cerr << app.help() << "\n";
  return 1;
}
