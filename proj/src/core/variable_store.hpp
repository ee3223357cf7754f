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

#ifndef MOOCLET_CORE_VARIABLE_STORE_HPP
#define MOOCLET_CORE_VARIABLE_STORE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/jsonio.hpp"

namespace mooclet {

// A typed scalar: either a number or a text label.  Binary values are stored
// as numbers 0/1 (JSON booleans are accepted on input).
struct Value {
  enum class Kind { number, text };

  Kind kind = Kind::number;
  double num = 0.0;
  std::string text;

  static Value number(double v) { return Value{Kind::number, v, {}}; }
  static Value label(std::string v) { return Value{Kind::text, 0.0, std::move(v)}; }

  bool is_number() const { return kind == Kind::number; }

  json to_json() const;
  static Value from_json(const json& j);

  bool operator==(const Value&) const = default;
};

enum class VarKind { numeric, categorical, binary };
enum class VarSource { external, derived, outcome };

const char* var_kind_name(VarKind kind);
VarKind var_kind_from_name(const std::string& name);
const char* var_source_name(VarSource source);
VarSource var_source_from_name(const std::string& name);

struct VariableDef {
  std::string name;
  VarKind kind = VarKind::numeric;
  std::vector<std::string> categories;  // required iff categorical
  VarSource source = VarSource::external;

  // Throws InvalidCategories / invalid_argument on a malformed definition.
  void validate() const;

  json to_json() const;
  static VariableDef from_json(const json& j);
};

// One timestamped observation for one learner.  sequence_no is assigned by
// the store (or by the owning engine's event log) and is store-wide monotone.
struct ValueEvent {
  std::string learner_id;
  std::string variable;
  Value value;
  std::int64_t timestamp = 0;
  std::int64_t sequence_no = 0;

  json to_json() const;
  static ValueEvent from_json(const json& j);
};

// Discretization of a numeric variable into half-open intervals closed on the
// right: (-inf, b1], (b1, b2], ..., (bk, +inf).
struct BinningSpec {
  std::string source_variable;
  int n_bins = 1;
  std::vector<double> boundaries;      // strictly increasing, size n_bins - 1
  std::vector<std::string> bin_labels; // size n_bins, unique

  void validate() const;

  json to_json() const;
  static BinningSpec from_json(const json& j);
};

// Boundaries at the k/n_bins empirical quantiles (linear interpolation),
// deduplicated; ties can therefore reduce the bin count below the request.
// Throws EmptyInput.
BinningSpec fit_quantile_bins(std::vector<double> values, int n_bins,
                              const std::string& source_variable = "");

// Label of the interval containing `raw`.  Total over reals; NaN is rejected
// with InvalidNumber.  A value exactly on a boundary falls in the lower bin.
const std::string& apply_binning(const BinningSpec& spec, double raw);

using Profile = std::map<std::string, Value>;

// The user variable store: dynamically registrable variables plus the latest
// typed value per (learner, variable).  The full event history lives in the
// owning engine's append-only log; the store keeps what lookups need.
class VariableStore {
 public:
  // Throws DuplicateVariable / InvalidCategories.
  void register_variable(const VariableDef& def);

  bool is_registered(const std::string& name) const;
  const VariableDef* find(const std::string& name) const;
  std::vector<VariableDef> definitions() const;  // registration order

  // Validates the event against the schema and appends it.  If the event's
  // sequence_no is <= 0 a store-local one is assigned.  Returns the stored
  // sequence_no.  Throws UnknownVariable / TypeMismatch /
  // NonMonotonicTimestamp (only when earlier than the learner's latest event
  // for that same variable).
  std::int64_t record(ValueEvent event);

  // Type check only, without mutating.  Returns the normalized value
  // (e.g. bool -> 0/1 number).  Throws like record().
  Value check_value(const std::string& variable, const Value& value) const;

  // Throws NonMonotonicTimestamp when the event is earlier than the
  // learner's latest event for that same variable.  No mutation.
  void validate_timestamp(const ValueEvent& event) const;

  std::optional<Value> latest(const std::string& learner_id,
                              const std::string& variable) const;

  // Latest value per variable the learner has; missing variables are absent.
  Profile learner_profile(const std::string& learner_id) const;

  // Applies the binning to the learner's latest source value, if any, and
  // records the derived label on `derived_variable` (which must be a
  // registered categorical covering the spec's labels).  Returns the stored
  // event, or nullopt when the learner has no source value.
  std::optional<ValueEvent> derive_binned(const BinningSpec& spec,
                                          const std::string& derived_variable,
                                          const std::string& learner_id,
                                          std::int64_t timestamp,
                                          std::int64_t sequence_no = 0);

  // Deterministic snapshot of latest values: learner -> variable -> value.
  json export_latest() const;

  std::int64_t last_sequence_no() const { return last_seq_; }

 private:
  struct Cell {
    Value value;
    std::int64_t timestamp = 0;
    std::int64_t sequence_no = 0;
  };

  std::vector<std::string> order_;
  std::map<std::string, VariableDef> defs_;
  std::map<std::string, std::map<std::string, Cell>> latest_;  // learner -> var -> cell
  std::int64_t last_seq_ = 0;
};

// Parses CSV rows "learner_id,variable,value,timestamp" (header required)
// into value events typed against the store's schema.  Throws on malformed
// rows or schema violations, reporting the offending line number.
std::vector<ValueEvent> parse_value_csv(const VariableStore& store, std::istream& in);

}  // namespace mooclet

#endif  // MOOCLET_CORE_VARIABLE_STORE_HPP
