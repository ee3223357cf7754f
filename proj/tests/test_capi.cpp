#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "mooclet/mooclet.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  mooclet_string_free(s);
  return out;
}

struct Handle {
  mooclet_engine* engine = nullptr;
  ~Handle() {
    if (engine) mooclet_engine_close(engine);
  }
};

}  // namespace

TEST_CASE("C API: full create/assign/reward/export round trip") {
  Handle h;
  REQUIRE(mooclet_engine_open("", "{\"seed\": 5}", &h.engine) == MOOCLET_OK);

  char* out = nullptr;
  REQUIRE(mooclet_register_variable(
              h.engine,
              R"({"name":"responded","kind":"binary","source":"outcome"})", &out) ==
          MOOCLET_OK);
  take(out);

  REQUIRE(mooclet_create_mooclet(
              h.engine,
              R"({"name":"subject_line","versions":[{"id":"v1"},{"id":"v2"}],
                  "outcome_variable":"responded"})",
              &out) == MOOCLET_OK);
  const json created = json::parse(take(out));
  const std::string mid = created.at("id");

  REQUIRE(mooclet_request_version(h.engine, mid.c_str(), "L1", nullptr, &out) == MOOCLET_OK);
  const json assignment = json::parse(take(out));
  const std::string aid = assignment.at("assignment_id");
  CHECK(assignment.at("version_id").get<std::string>().starts_with("v"));

  REQUIRE(mooclet_record_reward(h.engine, aid.c_str(), 1.0, "idem-1", &out) == MOOCLET_OK);
  const std::string reward_response = take(out);
  // idempotent replay returns the identical document
  REQUIRE(mooclet_record_reward(h.engine, aid.c_str(), 1.0, "idem-1", &out) == MOOCLET_OK);
  CHECK(take(out) == reward_response);

  REQUIRE(mooclet_stats(h.engine, mid.c_str(), &out) == MOOCLET_OK);
  const json stats = json::parse(take(out));
  CHECK(stats.at("subgroups").size() == 1);

  REQUIRE(mooclet_export_state(h.engine, &out) == MOOCLET_OK);
  const json state = json::parse(take(out));
  CHECK(state.at("assignments").size() == 1);
  CHECK(state.at("rewards").size() == 1);
}

TEST_CASE("C API: error codes and thread-local messages") {
  Handle h;
  REQUIRE(mooclet_engine_open(nullptr, nullptr, &h.engine) == MOOCLET_OK);

  char* out = nullptr;
  CHECK(mooclet_get(h.engine, "m404", &out) == MOOCLET_E_NOT_FOUND);
  CHECK(std::string(mooclet_last_error()).find("UnknownMooclet") != std::string::npos);

  CHECK(mooclet_create_mooclet(h.engine, "not json", &out) == MOOCLET_E_INVALID);
  CHECK(mooclet_create_mooclet(h.engine, R"({"name":""})", &out) == MOOCLET_E_INVALID);

  REQUIRE(mooclet_create_mooclet(h.engine, R"({"name":"m","versions":[{"id":"v1"}]})", &out) ==
          MOOCLET_OK);
  const std::string mid = json::parse(take(out)).at("id");
  CHECK(mooclet_create_mooclet(h.engine, R"({"name":"m"})", &out) == MOOCLET_E_CONFLICT);

  // malformed rule text is a parse error
  CHECK(mooclet_set_policy(h.engine, mid.c_str(),
                           R"({"kind":"rule_based","config":{"rules":"IF ; ;"}})", -1,
                           &out) == MOOCLET_E_PARSE);
  // stale expected revision is a conflict
  REQUIRE(mooclet_set_policy(h.engine, mid.c_str(), R"({"kind":"uniform_random"})", 0, &out) ==
          MOOCLET_OK);
  take(out);
  CHECK(mooclet_set_policy(h.engine, mid.c_str(), R"({"kind":"uniform_random"})", 0, &out) ==
        MOOCLET_E_CONFLICT);

  // a successful call clears the error message
  REQUIRE(mooclet_list(h.engine, &out) == MOOCLET_OK);
  take(out);
  CHECK(std::string(mooclet_last_error()).empty());
}

TEST_CASE("C API: persistence round trip and CSV export") {
  const std::string dir =
      (fs::temp_directory_path() / ("mooclet_capi_" + std::to_string(::getpid()))).string();
  fs::remove_all(dir);

  std::string export_before;
  {
    Handle h;
    REQUIRE(mooclet_engine_open(dir.c_str(), "{\"seed\": 9}", &h.engine) == MOOCLET_OK);
    char* out = nullptr;
    REQUIRE(mooclet_create_mooclet(
                h.engine, R"({"name":"m","versions":[{"id":"v1"},{"id":"v2"}]})", &out) ==
            MOOCLET_OK);
    const std::string mid = json::parse(take(out)).at("id");
    for (int i = 0; i < 10; ++i) {
      REQUIRE(mooclet_request_version(h.engine, mid.c_str(),
                                      ("L" + std::to_string(i)).c_str(), nullptr,
                                      &out) == MOOCLET_OK);
      const std::string aid = json::parse(take(out)).at("assignment_id");
      if (i % 2 == 0) {
        REQUIRE(mooclet_record_reward(h.engine, aid.c_str(), 1.0, nullptr, &out) == MOOCLET_OK);
        take(out);
      }
    }
    REQUIRE(mooclet_export_state(h.engine, &out) == MOOCLET_OK);
    export_before = take(out);
  }
  {
    Handle h;
    REQUIRE(mooclet_engine_open(dir.c_str(), "{\"seed\": 9}", &h.engine) == MOOCLET_OK);
    char* out = nullptr;
    REQUIRE(mooclet_export_state(h.engine, &out) == MOOCLET_OK);
    CHECK(take(out) == export_before);

    const std::string csv_path = dir + "/join.csv";
    REQUIRE(mooclet_export_csv(h.engine, csv_path.c_str()) == MOOCLET_OK);
    std::ifstream csv(csv_path);
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("assignment_id") == 0);
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 10);
  }
  fs::remove_all(dir);
}

TEST_CASE("C API: simulation entry points") {
  std::ifstream in(std::string(MOOCLET_SCENARIO_DIR) + "/interaction.json");
  REQUIRE(in.good());
  json scenario = json::parse(in);
  scenario["population"] = 450;
  scenario["waves"][0]["size"] = 300;
  scenario["waves"][1]["size"] = 150;

  char* out = nullptr;
  REQUIRE(mooclet_sim_run(scenario.dump().c_str(), nullptr, &out) == MOOCLET_OK);
  const json report = json::parse(take(out));
  CHECK(report.at("waves").size() == 2);

  const std::string policies =
      R"([{"kind":"uniform_random","config":{}},)"
      R"({"kind":"proportional_contextual","config":{"subgroup_variables":["group"]}}])";
  REQUIRE(mooclet_sim_compare(scenario.dump().c_str(), policies.c_str(), 3, 2, &out) ==
          MOOCLET_OK);
  const json compared = json::parse(take(out));
  CHECK(compared.at("policies").size() == 2);
  CHECK(compared.at("replications") == 3);

  CHECK(mooclet_sim_run("{\"population\": -3}", nullptr, &out) == MOOCLET_E_INVALID);
}
