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

#include "core/types.hpp"

#include "core/error.hpp"

namespace mooclet {

json Version::to_json() const {
  return json{{"id", id}, {"label", label}, {"payload", payload}};
}

Version Version::from_json(const json& j) {
  Version v;
  v.id = j.at("id").get<std::string>();
  v.label = j.value("label", v.id);
  v.payload = j.value("payload", json());
  return v;
}

const char* policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::uniform_random: return "uniform_random";
    case PolicyKind::weighted_random: return "weighted_random";
    case PolicyKind::rule_based: return "rule_based";
    case PolicyKind::ts_contextual: return "ts_contextual";
    case PolicyKind::proportional_contextual: return "proportional_contextual";
  }
  return "uniform_random";
}

PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "uniform_random") return PolicyKind::uniform_random;
  if (name == "weighted_random") return PolicyKind::weighted_random;
  if (name == "rule_based") return PolicyKind::rule_based;
  if (name == "ts_contextual") return PolicyKind::ts_contextual;
  if (name == "proportional_contextual") return PolicyKind::proportional_contextual;
  fail(Errc::invalid_policy, "unknown policy kind: " + name);
}

json PolicyRef::to_json() const {
  return json{{"kind", policy_kind_name(kind)}, {"config", config}, {"revision", revision}};
}

PolicyRef PolicyRef::from_json(const json& j) {
  PolicyRef p;
  p.kind = policy_kind_from_name(j.at("kind").get<std::string>());
  p.config = j.value("config", json::object());
  p.revision = j.value("revision", std::int64_t{0});
  return p;
}

const Version* Mooclet::find_version(const std::string& version_id) const {
  for (const auto& v : versions) {
    if (v.id == version_id) return &v;
  }
  return nullptr;
}

json Mooclet::to_json() const {
  json vs = json::array();
  for (const auto& v : versions) vs.push_back(v.to_json());
  return json{{"id", id},
              {"name", name},
              {"versions", vs},
              {"active_policy", active_policy.to_json()},
              {"created_at", created_at}};
}

Mooclet Mooclet::from_json(const json& j) {
  Mooclet m;
  m.id = j.at("id").get<std::string>();
  m.name = j.at("name").get<std::string>();
  for (const auto& v : j.value("versions", json::array())) {
    m.versions.push_back(Version::from_json(v));
  }
  if (j.contains("active_policy")) {
    m.active_policy = PolicyRef::from_json(j.at("active_policy"));
  }
  m.created_at = j.value("created_at", std::int64_t{0});
  return m;
}

std::vector<Combination> enumerate_combinations(const FactorialDesign& design) {
  if (design.factors.empty()) {
    fail(Errc::empty_design, "factorial design has no factors");
  }
  std::size_t total = 1;
  for (const auto& factor : design.factors) {
    if (factor.versions.empty()) {
      fail(Errc::empty_factor, "factor '" + factor.name + "' has no versions");
    }
    total *= factor.versions.size();
  }

  std::vector<Combination> out;
  out.reserve(total);
  Combination cell(design.factors.size());
  std::vector<std::size_t> index(design.factors.size(), 0);
  for (;;) {
    for (std::size_t f = 0; f < design.factors.size(); ++f) {
      cell[f] = design.factors[f].versions[index[f]].id;
    }
    out.push_back(cell);
    // Odometer advance, rightmost factor fastest.
    std::size_t f = design.factors.size();
    while (f > 0) {
      --f;
      if (++index[f] < design.factors[f].versions.size()) break;
      index[f] = 0;
      if (f == 0) return out;
    }
  }
}

std::string composite_cell_id(const FactorialDesign& design, const Combination& cell) {
  if (cell.size() != design.factors.size()) {
    fail(Errc::invalid_argument, "cell arity does not match design");
  }
  std::string out;
  for (std::size_t f = 0; f < cell.size(); ++f) {
    if (f > 0) out += '|';
    out += design.factors[f].name;
    out += '=';
    out += cell[f];
  }
  return out;
}

}  // namespace mooclet
