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

#ifndef MOOCLET_CORE_ERROR_HPP
#define MOOCLET_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mooclet {

// Stable error codes shared by the C++ core, the C API and the HTTP layer.
enum class Errc {
  invalid_argument,
  empty_design,
  empty_factor,
  duplicate_variable,
  invalid_categories,
  unknown_variable,
  type_mismatch,
  non_monotonic_timestamp,
  empty_input,
  invalid_number,
  dsl_syntax,
  invalid_policy,
  no_versions,
  unknown_version,
  invalid_floor,
  invalid_weights,
  unregistered_subgroup_variable,
  no_arms,
  duplicate_reward,
  unknown_assignment,
  degenerate_table,
  too_few_strata,
  zero_propensity,
  estimated_propensity,
  duplicate_name,
  unknown_mooclet,
  revision_conflict,
  duplicate_request,
  io_error,
  invalid_scenario,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Errc code() const { return code_; }
  const char* code_name() const { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mooclet

#endif  // MOOCLET_CORE_ERROR_HPP
