// Test-only oracles, deliberately written as independent routes from the
// library code they check.
#ifndef MOOCLET_TESTS_ORACLES_HPP
#define MOOCLET_TESTS_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "core/policy_dsl.hpp"
#include "core/stats.hpp"
#include "core/variable_store.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Chi-square tail oracle: for integer df, Q(df/2, x/2) has a closed form.
// Even df = 2m:  Q(m, y) = e^-y * sum_{j<m} y^j / j!
// Odd  df = 2m+1: start from Q(1/2, y) = erfc(sqrt(y)) and apply
//   Q(a+1, y) = Q(a, y) + y^a e^-y / Gamma(a+1)  m times.
// All in long double; independent of the series/continued-fraction route.
inline long double chi_square_tail(long double x, int df) {
  const long double y = x / 2.0L;
  if (y == 0.0L) return 1.0L;
  if (df % 2 == 0) {
    const int m = df / 2;
    long double term = std::exp(-y);
    long double sum = term;
    for (int j = 1; j < m; ++j) {
      term *= y / j;
      sum += term;
    }
    return sum;
  }
  const int m = df / 2;  // df = 2m + 1
  long double q = std::erfc(std::sqrt(y));
  long double a = 0.5L;
  for (int j = 0; j < m; ++j) {
    q += std::exp(a * std::log(y) - y - std::lgamma(a + 1.0L));
    a += 1.0L;
  }
  return q;
}

// Direct-formula chi-square statistic in long double.
inline long double chi_square_statistic(const std::vector<std::vector<double>>& counts) {
  const std::size_t r = counts.size();
  const std::size_t c = counts.front().size();
  std::vector<long double> row(r, 0.0L), col(c, 0.0L);
  long double total = 0.0L;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      row[i] += counts[i][j];
      col[j] += counts[i][j];
      total += counts[i][j];
    }
  }
  long double stat = 0.0L;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const long double expected = row[i] * col[j] / total;
      const long double diff = counts[i][j] - expected;
      stat += diff * diff / expected;
    }
  }
  return stat;
}

// ---------------------------------------------------------------------------
// Naive rule interpreter: a second, separately-written walk of the DSL AST.
// Missing variables make an atom false, exactly like the engine contract.

inline bool naive_atom(const mooclet::dsl::Atom& atom, const mooclet::Profile& profile) {
  using mooclet::dsl::CompareOp;
  const auto found = profile.find(atom.variable);
  if (found == profile.end()) return false;
  const mooclet::Value& v = found->second;

  if (atom.op == CompareOp::in) {
    for (const auto& lit : atom.values) {
      if (lit.is_number && v.is_number() && v.num == lit.number) return true;
      if (!lit.is_number && !v.is_number() && v.text == lit.text) return true;
    }
    return false;
  }
  const auto& lit = atom.values.at(0);
  const bool comparable = lit.is_number == v.is_number();
  switch (atom.op) {
    case CompareOp::eq:
      return comparable && (lit.is_number ? v.num == lit.number : v.text == lit.text);
    case CompareOp::ne:
      return comparable && (lit.is_number ? v.num != lit.number : v.text != lit.text);
    case CompareOp::lt:
      return comparable && lit.is_number && v.num < lit.number;
    case CompareOp::le:
      return comparable && lit.is_number && v.num <= lit.number;
    case CompareOp::gt:
      return comparable && lit.is_number && v.num > lit.number;
    case CompareOp::ge:
      return comparable && lit.is_number && v.num >= lit.number;
    case CompareOp::in:
      return false;
  }
  return false;
}

inline bool naive_expr(const mooclet::dsl::Expr& e, const mooclet::Profile& profile) {
  using Node = mooclet::dsl::Expr::Node;
  if (e.node == Node::atom) return naive_atom(e.atom, profile);
  if (e.node == Node::con_not) return !naive_expr(*e.children.at(0), profile);
  if (e.node == Node::con_and) {
    bool all = true;
    for (const auto& child : e.children) all = all && naive_expr(*child, profile);
    return all;
  }
  bool any = false;
  for (const auto& child : e.children) any = any || naive_expr(*child, profile);
  return any;
}

inline mooclet::dsl::Decision naive_evaluate(const mooclet::dsl::RuleSet& rs,
                                             const mooclet::Profile& profile) {
  using mooclet::dsl::Decision;
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    if (naive_expr(*rs.rules[i].condition, profile)) {
      return Decision{Decision::Kind::version, rs.rules[i].version_id, static_cast<int>(i)};
    }
  }
  return Decision{rs.default_is_delegate ? Decision::Kind::delegate : Decision::Kind::version,
                  rs.default_target, -1};
}

// ---------------------------------------------------------------------------
// Random well-typed policy generator over a small fixed schema.

struct GenSchema {
  // variable name -> (is_numeric, categories when categorical)
  std::vector<std::string> numeric_vars = {"age", "score"};
  std::vector<std::string> binary_vars = {"responded"};
  std::map<std::string, std::vector<std::string>> categorical_vars = {
      {"age_group", {"18-22", "23-26", "27-34", "35-44", "45+"}},
      {"days_active_group", {"0", "1", "2+"}},
  };
  std::vector<std::string> versions = {"v1", "v2", "v3"};
  std::vector<std::string> delegate_names = {"fallback"};
};

class PolicyGenerator {
 public:
  PolicyGenerator(const GenSchema& schema, std::uint64_t seed)
      : schema_(schema), gen_(seed) {}

  mooclet::dsl::RuleSet ruleset() {
    mooclet::dsl::RuleSet rs;
    const int n_rules = pick(0, 4);
    for (int i = 0; i < n_rules; ++i) {
      mooclet::dsl::Rule rule;
      rule.condition = expr(0);
      rule.version_id = version();
      rs.rules.push_back(std::move(rule));
    }
    if (pick(0, 9) == 0) {
      rs.default_is_delegate = true;
      rs.default_target = schema_.delegate_names[static_cast<std::size_t>(
          pick(0, static_cast<int>(schema_.delegate_names.size()) - 1))];
    } else {
      rs.default_target = version();
    }
    return rs;
  }

  mooclet::Profile random_profile() {
    mooclet::Profile profile;
    for (const auto& name : schema_.numeric_vars) {
      if (pick(0, 2) == 0) continue;  // leave some variables missing
      profile.emplace(name, mooclet::Value::number(pick(0, 60)));
    }
    for (const auto& name : schema_.binary_vars) {
      if (pick(0, 2) == 0) continue;
      profile.emplace(name, mooclet::Value::number(pick(0, 1)));
    }
    for (const auto& [name, cats] : schema_.categorical_vars) {
      if (pick(0, 2) == 0) continue;
      profile.emplace(name,
                      mooclet::Value::label(cats[static_cast<std::size_t>(
                          pick(0, static_cast<int>(cats.size()) - 1))]));
    }
    return profile;
  }

 private:
  int pick(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

  std::string version() {
    return schema_.versions[static_cast<std::size_t>(
        pick(0, static_cast<int>(schema_.versions.size()) - 1))];
  }

  mooclet::dsl::Atom atom() {
    using mooclet::dsl::CompareOp;
    using mooclet::dsl::Literal;
    mooclet::dsl::Atom a;
    const int family = pick(0, 2);
    if (family == 0) {  // numeric comparison
      a.variable = schema_.numeric_vars[static_cast<std::size_t>(
          pick(0, static_cast<int>(schema_.numeric_vars.size()) - 1))];
      const CompareOp ops[] = {CompareOp::eq, CompareOp::ne, CompareOp::lt,
                               CompareOp::le, CompareOp::gt, CompareOp::ge};
      a.op = ops[pick(0, 5)];
      double value = pick(0, 80);
      if (pick(0, 1)) value += 0.5;
      if (pick(0, 9) == 0) value = -value;
      a.values.push_back(Literal::num(value));
      if (a.op == CompareOp::in) a.op = CompareOp::eq;
    } else if (family == 1) {  // binary equality
      a.variable = schema_.binary_vars[0];
      a.op = pick(0, 1) ? CompareOp::eq : CompareOp::ne;
      a.values.push_back(Literal::num(pick(0, 1)));
    } else {  // categorical equality or IN set
      auto it = schema_.categorical_vars.begin();
      std::advance(it, pick(0, static_cast<int>(schema_.categorical_vars.size()) - 1));
      a.variable = it->first;
      const auto& cats = it->second;
      if (pick(0, 1)) {
        a.op = pick(0, 1) ? CompareOp::eq : CompareOp::ne;
        a.values.push_back(Literal::str(cats[static_cast<std::size_t>(
            pick(0, static_cast<int>(cats.size()) - 1))]));
      } else {
        a.op = CompareOp::in;
        const int n = pick(1, std::min<int>(3, static_cast<int>(cats.size())));
        std::set<std::string> chosen;
        while (static_cast<int>(chosen.size()) < n) {
          chosen.insert(cats[static_cast<std::size_t>(
              pick(0, static_cast<int>(cats.size()) - 1))]);
        }
        for (const auto& cat : chosen) a.values.push_back(Literal::str(cat));
      }
    }
    return a;
  }

  mooclet::dsl::ExprPtr expr(int depth) {
    using mooclet::dsl::Expr;
    const int choice = depth >= 3 ? 0 : pick(0, 9);
    if (choice < 5) return Expr::make_atom(atom());
    if (choice < 7) return Expr::make_not(expr(depth + 1));
    std::vector<mooclet::dsl::ExprPtr> children;
    const int n = pick(2, 3);
    for (int i = 0; i < n; ++i) children.push_back(expr(depth + 1));
    return choice < 9 ? Expr::make_and(std::move(children))
                      : Expr::make_or(std::move(children));
  }

  GenSchema schema_;
  std::mt19937_64 gen_;
};

// Registers the generator schema into a store so check_policy passes.
inline void register_gen_schema(mooclet::VariableStore& store, const GenSchema& schema = {}) {
  using mooclet::VariableDef;
  for (const auto& name : schema.numeric_vars) {
    VariableDef def;
    def.name = name;
    def.kind = mooclet::VarKind::numeric;
    store.register_variable(def);
  }
  for (const auto& name : schema.binary_vars) {
    VariableDef def;
    def.name = name;
    def.kind = mooclet::VarKind::binary;
    store.register_variable(def);
  }
  for (const auto& [name, cats] : schema.categorical_vars) {
    VariableDef def;
    def.name = name;
    def.kind = mooclet::VarKind::categorical;
    def.categories = cats;
    store.register_variable(def);
  }
}

}  // namespace oracles

#endif  // MOOCLET_TESTS_ORACLES_HPP
