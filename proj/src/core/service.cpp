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

#include "core/service.hpp"

#include <httplib.h>

#include "core/error.hpp"

namespace mooclet {

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::unknown_mooclet:
    case Errc::unknown_assignment:
      return 404;
    case Errc::duplicate_name:
    case Errc::duplicate_variable:
    case Errc::duplicate_reward:
    case Errc::revision_conflict:
    case Errc::duplicate_request:
      return 409;
    case Errc::io_error:
      return 503;
    default:
      return 422;
  }
}

void write_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) fail(Errc::invalid_argument, "request body is not valid JSON");
  return body;
}

std::string idem_key(const httplib::Request& req) {
  return req.get_header_value("Idempotency-Key");
}

}  // namespace

HttpService::HttpService(Engine& engine, std::string bearer_token)
    : engine_(engine),
      bearer_token_(std::move(bearer_token)),
      server_(std::make_unique<httplib::Server>()) {
  configure_routes();
}

HttpService::~HttpService() { stop(); }

int HttpService::bind_any(const std::string& host) {
  return server_->bind_to_any_port(host);
}

void HttpService::run() { server_->listen_after_bind(); }

bool HttpService::listen(const std::string& host, int port) {
  return server_->listen(host, port);
}

void HttpService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void HttpService::configure_routes() {
  auto& svr = *server_;

  auto handle = [this](const httplib::Request& req, httplib::Response& res,
                       auto&& body_fn) {
    if (!bearer_token_.empty()) {
      if (req.get_header_value("Authorization") != "Bearer " + bearer_token_) {
        write_json(res, 401, json{{"error", "Unauthorized"}, {"message", "missing or bad bearer token"}});
        return;
      }
    }
    try {
      body_fn(req, res);
    } catch (const Error& e) {
      write_json(res, status_for(e.code()),
                 json{{"error", e.code_name()}, {"message", e.what()}});
    } catch (const json::exception& e) {
      write_json(res, 422, json{{"error", "InvalidArgument"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      write_json(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
    }
  };

  svr.Get("/health", [handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [](const httplib::Request&, httplib::Response& r) {
      write_json(r, 200, json{{"status", "ok"}});
    });
  });

  svr.Post("/mooclets", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 201, engine_.create_mooclet(parse_body(rq), idem_key(rq)));
    });
  });

  svr.Get("/mooclets", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request&, httplib::Response& r) {
      write_json(r, 200, engine_.list_mooclets());
    });
  });

  svr.Get(R"(/mooclets/([^/]+))", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.get_mooclet(rq.matches[1]));
    });
  });

  svr.Post(R"(/mooclets/([^/]+)/versions)",
           [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 201, engine_.add_version(rq.matches[1], parse_body(rq), idem_key(rq)));
    });
  });

  svr.Put(R"(/mooclets/([^/]+)/policy)",
          [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      json body = parse_body(rq);
      std::optional<std::int64_t> expected;
      if (body.contains("expected_revision") && !body.at("expected_revision").is_null()) {
        expected = body.at("expected_revision").get<std::int64_t>();
      }
      write_json(r, 200, engine_.set_policy(rq.matches[1], body, expected, idem_key(rq)));
    });
  });

  svr.Get(R"(/mooclets/([^/]+)/policy)",
          [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.get_policy(rq.matches[1]));
    });
  });

  svr.Get(R"(/mooclets/([^/]+)/version)",
          [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      const std::string learner = rq.get_param_value("learner");
      const std::string wave = rq.get_param_value("wave");
      std::optional<std::int64_t> ts;
      if (rq.has_param("timestamp")) ts = std::stoll(rq.get_param_value("timestamp"));
      write_json(r, 200, engine_.request_version(rq.matches[1], learner, wave, ts));
    });
  });

  svr.Post(R"(/mooclets/([^/]+)/rebalance)",
           [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.rebalance(rq.matches[1], idem_key(rq)));
    });
  });

  svr.Get(R"(/mooclets/([^/]+)/stats)",
          [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.stats(rq.matches[1]));
    });
  });

  svr.Post("/variables", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 201, engine_.register_variable(parse_body(rq), idem_key(rq)));
    });
  });

  svr.Get("/variables", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request&, httplib::Response& r) {
      write_json(r, 200, engine_.list_variables());
    });
  });

  svr.Post("/values", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.record_value(parse_body(rq), idem_key(rq)));
    });
  });

  svr.Post("/rewards", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      json body = parse_body(rq);
      std::optional<std::int64_t> ts;
      if (body.contains("timestamp") && !body.at("timestamp").is_null()) {
        ts = body.at("timestamp").get<std::int64_t>();
      }
      write_json(r, 200,
                 engine_.record_reward(body.at("assignment_id").get<std::string>(),
                                       body.at("value").get<double>(), idem_key(rq), ts));
    });
  });

  svr.Post("/analysis", [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.analysis_report(parse_body(rq)));
    });
  });

  svr.Get(R"(/learners/([^/]+)/profile)",
          [this, handle](const httplib::Request& req, httplib::Response& res) {
    handle(req, res, [this](const httplib::Request& rq, httplib::Response& r) {
      write_json(r, 200, engine_.learner_profile_json(rq.matches[1]));
    });
  });
}

}  // namespace mooclet
