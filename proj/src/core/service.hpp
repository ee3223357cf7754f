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

#ifndef MOOCLET_CORE_SERVICE_HPP
#define MOOCLET_CORE_SERVICE_HPP

#include <memory>
#include <string>

#include "core/engine.hpp"

namespace httplib {
class Server;
}

namespace mooclet {

// HTTP+JSON front end over an Engine.
//
//   POST /mooclets                    create a mooclet (name, versions, ...)
//   GET  /mooclets                    list mooclets
//   GET  /mooclets/{id}               fetch one
//   POST /mooclets/{id}/versions      add a version
//   PUT  /mooclets/{id}/policy        swap the active policy (atomic, revisioned)
//   GET  /mooclets/{id}/policy        active policy
//   GET  /mooclets/{id}/version?learner=L&wave=W   serve an assignment
//   POST /mooclets/{id}/rebalance     recompute proportional weights
//   GET  /mooclets/{id}/stats         per-subgroup arm state
//   POST /variables                   register a variable
//   GET  /variables                   list definitions
//   POST /values                      record a value event
//   POST /rewards                     record a reward {assignment_id, value}
//   POST /analysis                    run an analysis report
//   GET  /learners/{id}/profile       latest values for a learner
//   GET  /health
//
// Mutating endpoints honor the Idempotency-Key header: a replayed key returns
// the original response.  When a bearer token is configured every endpoint
// requires "Authorization: Bearer <token>".
class HttpService {
 public:
  HttpService(Engine& engine, std::string bearer_token);
  ~HttpService();

  // Binds to an OS-assigned port; returns it.  Serving starts with run().
  int bind_any(const std::string& host);

  // Blocking accept loop (after bind_any), for use on a dedicated thread.
  void run();

  // Bind + serve in one call; blocks until stop().
  bool listen(const std::string& host, int port);

  void stop();

 private:
  void configure_routes();

  Engine& engine_;
  std::string bearer_token_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace mooclet

#endif  // MOOCLET_CORE_SERVICE_HPP
