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

#include "core/variable_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

#include "core/error.hpp"

namespace mooclet {

json Value::to_json() const {
  if (kind == Kind::number) return json(num);
  return json(text);
}

Value Value::from_json(const json& j) {
  if (j.is_number()) return Value::number(j.get<double>());
  if (j.is_boolean()) return Value::number(j.get<bool>() ? 1.0 : 0.0);
  if (j.is_string()) return Value::label(j.get<std::string>());
  fail(Errc::type_mismatch, "value must be a number, boolean or string");
}

const char* var_kind_name(VarKind kind) {
  switch (kind) {
    case VarKind::numeric: return "numeric";
    case VarKind::categorical: return "categorical";
    case VarKind::binary: return "binary";
  }
  return "numeric";
}

VarKind var_kind_from_name(const std::string& name) {
  if (name == "numeric") return VarKind::numeric;
  if (name == "categorical") return VarKind::categorical;
  if (name == "binary") return VarKind::binary;
  fail(Errc::invalid_argument, "unknown variable kind: " + name);
}

const char* var_source_name(VarSource source) {
  switch (source) {
    case VarSource::external: return "external";
    case VarSource::derived: return "derived";
    case VarSource::outcome: return "outcome";
  }
  return "external";
}

VarSource var_source_from_name(const std::string& name) {
  if (name == "external") return VarSource::external;
  if (name == "derived") return VarSource::derived;
  if (name == "outcome") return VarSource::outcome;
  fail(Errc::invalid_argument, "unknown variable source: " + name);
}

void VariableDef::validate() const {
  if (name.empty()) fail(Errc::invalid_argument, "variable name must be non-empty");
  if (kind == VarKind::categorical) {
    if (categories.empty()) {
      fail(Errc::invalid_categories, "categorical variable '" + name + "' needs at least one category");
    }
    std::set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size()) {
      fail(Errc::invalid_categories, "variable '" + name + "' has duplicate categories");
    }
  } else if (!categories.empty()) {
    fail(Errc::invalid_categories, "variable '" + name + "' is not categorical but lists categories");
  }
  if (source == VarSource::outcome && kind == VarKind::categorical) {
    fail(Errc::invalid_argument, "outcome variable '" + name + "' must be binary or numeric");
  }
}

json VariableDef::to_json() const {
  return json{{"name", name},
              {"kind", var_kind_name(kind)},
              {"categories", categories},
              {"source", var_source_name(source)}};
}

VariableDef VariableDef::from_json(const json& j) {
  VariableDef def;
  def.name = j.at("name").get<std::string>();
  def.kind = var_kind_from_name(j.at("kind").get<std::string>());
  def.categories = j.value("categories", std::vector<std::string>{});
  def.source = var_source_from_name(j.value("source", "external"));
  return def;
}

json ValueEvent::to_json() const {
  return json{{"learner_id", learner_id},
              {"variable", variable},
              {"value", value.to_json()},
              {"timestamp", timestamp},
              {"sequence_no", sequence_no}};
}

ValueEvent ValueEvent::from_json(const json& j) {
  ValueEvent ev;
  ev.learner_id = j.at("learner_id").get<std::string>();
  ev.variable = j.at("variable").get<std::string>();
  ev.value = Value::from_json(j.at("value"));
  ev.timestamp = j.value("timestamp", std::int64_t{0});
  ev.sequence_no = j.value("sequence_no", std::int64_t{0});
  return ev;
}

void BinningSpec::validate() const {
  if (n_bins < 1) fail(Errc::invalid_argument, "binning needs at least one bin");
  if (static_cast<int>(boundaries.size()) != n_bins - 1) {
    fail(Errc::invalid_argument, "binning boundary count must be n_bins - 1");
  }
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i - 1] < boundaries[i])) {
      fail(Errc::invalid_argument, "binning boundaries must be strictly increasing");
    }
  }
  if (static_cast<int>(bin_labels.size()) != n_bins) {
    fail(Errc::invalid_argument, "binning needs one label per bin");
  }
  std::set<std::string> seen(bin_labels.begin(), bin_labels.end());
  if (seen.size() != bin_labels.size()) {
    fail(Errc::invalid_argument, "bin labels must be unique");
  }
}

json BinningSpec::to_json() const {
  return json{{"source_variable", source_variable},
              {"n_bins", n_bins},
              {"boundaries", boundaries},
              {"bin_labels", bin_labels}};
}

BinningSpec BinningSpec::from_json(const json& j) {
  BinningSpec spec;
  spec.source_variable = j.value("source_variable", "");
  spec.n_bins = j.at("n_bins").get<int>();
  spec.boundaries = j.value("boundaries", std::vector<double>{});
  spec.bin_labels = j.value("bin_labels", std::vector<std::string>{});
  spec.validate();
  return spec;
}

namespace {

// Compact decimal rendering for auto-generated bin labels.
std::string format_cut(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Empirical quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BinningSpec fit_quantile_bins(std::vector<double> values, int n_bins,
                              const std::string& source_variable) {
  if (values.empty()) fail(Errc::empty_input, "cannot fit bins on an empty sample");
  if (n_bins < 1) fail(Errc::invalid_argument, "n_bins must be >= 1");
  for (double v : values) {
    if (std::isnan(v)) fail(Errc::invalid_number, "cannot fit bins on NaN values");
  }
  std::sort(values.begin(), values.end());

  std::vector<double> cuts;
  for (int k = 1; k < n_bins; ++k) {
    const double q = quantile_sorted(values, static_cast<double>(k) / n_bins);
    if (cuts.empty() || q > cuts.back()) cuts.push_back(q);
  }
  // A cut equal to the sample maximum would create an empty top bin.
  while (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();

  BinningSpec spec;
  spec.source_variable = source_variable;
  spec.boundaries = cuts;
  spec.n_bins = static_cast<int>(cuts.size()) + 1;
  if (cuts.empty()) {
    const std::string lo = format_cut(values.front());
    const std::string hi = format_cut(values.back());
    spec.bin_labels = {lo == hi ? lo : lo + "-" + hi};
  } else {
    spec.bin_labels.push_back("<=" + format_cut(cuts.front()));
    for (std::size_t i = 1; i < cuts.size(); ++i) {
      spec.bin_labels.push_back(format_cut(cuts[i - 1]) + "-" + format_cut(cuts[i]));
    }
    spec.bin_labels.push_back(">" + format_cut(cuts.back()));
  }
  spec.validate();
  return spec;
}

const std::string& apply_binning(const BinningSpec& spec, double raw) {
  if (std::isnan(raw)) fail(Errc::invalid_number, "cannot bin NaN");
  // First boundary >= raw; a value equal to a boundary keeps the lower bin
  // (intervals are closed on the right).
  auto it = std::lower_bound(spec.boundaries.begin(), spec.boundaries.end(), raw);
  const auto idx = static_cast<std::size_t>(it - spec.boundaries.begin());
  return spec.bin_labels[idx];
}

void VariableStore::register_variable(const VariableDef& def) {
  def.validate();
  if (defs_.count(def.name)) {
    fail(Errc::duplicate_variable, "variable '" + def.name + "' is already registered");
  }
  defs_.emplace(def.name, def);
  order_.push_back(def.name);
}

bool VariableStore::is_registered(const std::string& name) const {
  return defs_.count(name) > 0;
}

const VariableDef* VariableStore::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

std::vector<VariableDef> VariableStore::definitions() const {
  std::vector<VariableDef> out;
  out.reserve(order_.size());
  for (const auto& name : order_) out.push_back(defs_.at(name));
  return out;
}

Value VariableStore::check_value(const std::string& variable, const Value& value) const {
  const VariableDef* def = find(variable);
  if (!def) fail(Errc::unknown_variable, "variable '" + variable + "' is not registered");
  switch (def->kind) {
    case VarKind::numeric:
      if (!value.is_number() || std::isnan(value.num)) {
        fail(Errc::type_mismatch, "variable '" + variable + "' expects a number");
      }
      return value;
    case VarKind::binary:
      if (!value.is_number() || (value.num != 0.0 && value.num != 1.0)) {
        fail(Errc::type_mismatch, "variable '" + variable + "' expects 0 or 1");
      }
      return value;
    case VarKind::categorical: {
      if (value.is_number()) {
        fail(Errc::type_mismatch, "variable '" + variable + "' expects a category label");
      }
      const auto& cats = def->categories;
      if (std::find(cats.begin(), cats.end(), value.text) == cats.end()) {
        fail(Errc::type_mismatch,
             "'" + value.text + "' is not a declared category of '" + variable + "'");
      }
      return value;
    }
  }
  return value;
}

void VariableStore::validate_timestamp(const ValueEvent& event) const {
  auto learner = latest_.find(event.learner_id);
  if (learner == latest_.end()) return;
  auto cell = learner->second.find(event.variable);
  if (cell != learner->second.end() && event.timestamp < cell->second.timestamp) {
    fail(Errc::non_monotonic_timestamp,
         "event for (" + event.learner_id + ", " + event.variable +
             ") is earlier than the learner's latest event for that variable");
  }
}

std::int64_t VariableStore::record(ValueEvent event) {
  event.value = check_value(event.variable, event.value);
  validate_timestamp(event);
  auto& per_learner = latest_[event.learner_id];
  if (event.sequence_no <= 0) event.sequence_no = last_seq_ + 1;
  last_seq_ = std::max(last_seq_, event.sequence_no);
  per_learner[event.variable] = Cell{event.value, event.timestamp, event.sequence_no};
  return event.sequence_no;
}

std::optional<Value> VariableStore::latest(const std::string& learner_id,
                                           const std::string& variable) const {
  auto learner = latest_.find(learner_id);
  if (learner == latest_.end()) return std::nullopt;
  auto cell = learner->second.find(variable);
  if (cell == learner->second.end()) return std::nullopt;
  return cell->second.value;
}

Profile VariableStore::learner_profile(const std::string& learner_id) const {
  Profile out;
  auto learner = latest_.find(learner_id);
  if (learner == latest_.end()) return out;
  for (const auto& [var, cell] : learner->second) out.emplace(var, cell.value);
  return out;
}

std::optional<ValueEvent> VariableStore::derive_binned(const BinningSpec& spec,
                                                       const std::string& derived_variable,
                                                       const std::string& learner_id,
                                                       std::int64_t timestamp,
                                                       std::int64_t sequence_no) {
  spec.validate();
  auto raw = latest(learner_id, spec.source_variable);
  if (!raw) return std::nullopt;
  if (!raw->is_number()) {
    fail(Errc::type_mismatch, "source variable '" + spec.source_variable + "' is not numeric");
  }
  ValueEvent ev;
  ev.learner_id = learner_id;
  ev.variable = derived_variable;
  ev.value = Value::label(apply_binning(spec, raw->num));
  ev.timestamp = timestamp;
  ev.sequence_no = sequence_no;
  ev.sequence_no = record(ev);
  return ev;
}

json VariableStore::export_latest() const {
  json out = json::object();
  for (const auto& [learner, cells] : latest_) {
    json row = json::object();
    for (const auto& [var, cell] : cells) {
      row[var] = json{{"value", cell.value.to_json()},
                      {"timestamp", cell.timestamp},
                      {"sequence_no", cell.sequence_no}};
    }
    out[learner] = std::move(row);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  // Minimal CSV: no quoting, comma separated, whitespace preserved.
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<ValueEvent> parse_value_csv(const VariableStore& store, std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::empty_input, "CSV input is empty");
  auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"learner_id", "variable", "value", "timestamp"};
  if (std::vector<std::string>(header.begin(), header.end()) != expected) {
    fail(Errc::invalid_argument, "CSV header must be learner_id,variable,value,timestamp");
  }

  std::vector<ValueEvent> events;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      fail(Errc::invalid_argument, "CSV line " + std::to_string(line_no) + ": expected 4 fields");
    }
    const VariableDef* def = store.find(fields[1]);
    if (!def) {
      fail(Errc::unknown_variable,
           "CSV line " + std::to_string(line_no) + ": variable '" + fields[1] + "' is not registered");
    }
    ValueEvent ev;
    ev.learner_id = fields[0];
    ev.variable = fields[1];
    if (def->kind == VarKind::categorical) {
      ev.value = Value::label(fields[2]);
    } else {
      double num = 0.0;
      const char* first = fields[2].data();
      const char* last = first + fields[2].size();
      auto res = std::from_chars(first, last, num);
      if (res.ec != std::errc{} || res.ptr != last) {
        fail(Errc::type_mismatch,
             "CSV line " + std::to_string(line_no) + ": '" + fields[2] + "' is not a number");
      }
      ev.value = Value::number(num);
    }
    std::int64_t ts = 0;
    const char* tfirst = fields[3].data();
    const char* tlast = tfirst + fields[3].size();
    auto tres = std::from_chars(tfirst, tlast, ts);
    if (tres.ec != std::errc{} || tres.ptr != tlast) {
      fail(Errc::invalid_argument,
           "CSV line " + std::to_string(line_no) + ": bad timestamp '" + fields[3] + "'");
    }
    ev.timestamp = ts;
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace mooclet
