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

#ifndef MOOCLET_CORE_EVENT_LOG_HPP
#define MOOCLET_CORE_EVENT_LOG_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "core/jsonio.hpp"

namespace mooclet {

// Append-only JSONL event log, one event per line.  The caller (the engine)
// serializes access; this class only handles sequencing and I/O.
class EventLog {
 public:
  EventLog() = default;  // in-memory mode: sequence numbers only, no file

  // Opens (creating if needed) the log file for appending.
  // Throws IoError when the file cannot be opened.
  explicit EventLog(const std::string& path);

  bool persistent() const { return !path_.empty(); }
  const std::string& path() const { return path_; }

  std::int64_t last_seq() const { return seq_; }
  void set_last_seq(std::int64_t seq) { seq_ = seq; }

  std::int64_t reserve_seq() { return ++seq_; }

  // Writes one event line and flushes.  Throws IoError on failure (the
  // engine surfaces that as a 503).
  void write(const json& event);

  // Reads all complete events from a log file, in order.  A torn final line
  // (crash mid-write) is dropped; any earlier malformed line raises IoError.
  static std::vector<json> read_all(const std::string& path);

  // Fault injection for the unwritable-log paths.
  void fail_writes_for_testing(bool fail) { fail_writes_ = fail; }

 private:
  std::string path_;
  std::ofstream out_;
  std::int64_t seq_ = 0;
  bool fail_writes_ = false;
};

}  // namespace mooclet

#endif  // MOOCLET_CORE_EVENT_LOG_HPP
