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

#include "core/event_log.hpp"

#include "core/error.hpp"

namespace mooclet {

EventLog::EventLog(const std::string& path) : path_(path) {
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) fail(Errc::io_error, "cannot open event log '" + path + "' for append");
}

void EventLog::write(const json& event) {
  if (fail_writes_) fail(Errc::io_error, "event log is unwritable (fault injection)");
  if (!persistent()) return;
  out_ << event.dump() << '\n';
  out_.flush();
  if (!out_) fail(Errc::io_error, "failed to append to event log '" + path_ + "'");
}

std::vector<json> EventLog::read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<json> events;
  if (!in) return events;  // a missing log is an empty store

  std::string line;
  bool saw_eof_without_newline = false;
  while (std::getline(in, line)) {
    if (in.eof() && !line.empty()) saw_eof_without_newline = true;
    if (line.empty()) continue;
    json event = json::parse(line, nullptr, false);
    if (event.is_discarded()) {
      if (in.eof()) break;  // torn final line from a crash mid-write
      fail(Errc::io_error, "corrupt event log line in '" + path + "'");
    }
    // A syntactically complete JSON document on a final unterminated line is
    // still a complete event; keep it.
    events.push_back(std::move(event));
  }
  (void)saw_eof_without_newline;
  return events;
}

}  // namespace mooclet
