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
//
// A small IF-THEN rule language for rule-based policies:
//
//   policy        := rule* defaultClause
//   rule          := "IF" expr "THEN" ident ";"
//   defaultClause := "DEFAULT" ( "POLICY" ident | ident ) ";"
//   expr          := andExpr ("OR" andExpr)*
//   andExpr       := notExpr ("AND" notExpr)*
//   notExpr       := "NOT" notExpr | "(" expr ")" | atom
//   atom          := ident op literal
//                  | ident "IN" "{" literal ("," literal)* "}"
//   op            := "==" | "!=" | "<" | "<=" | ">" | ">="
//   literal       := double-quoted string (\\ and \" escapes)
//                  | decimal number with optional sign and fraction
//
// Line comments start with '#'.  Rules are evaluated in order, first match
// wins.  A comparison on a variable absent from the profile is false -- which
// makes NOT over a missing variable TRUE; rule authors must keep that edge in
// mind when negating.

#ifndef MOOCLET_CORE_POLICY_DSL_HPP
#define MOOCLET_CORE_POLICY_DSL_HPP

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "core/types.hpp"
#include "core/variable_store.hpp"

namespace mooclet::dsl {

enum class CompareOp { eq, ne, lt, le, gt, ge, in };

const char* compare_op_text(CompareOp op);

// A literal in a condition: either a number or a string.
struct Literal {
  bool is_number = false;
  double number = 0.0;
  std::string text;

  static Literal num(double v) { return Literal{true, v, {}}; }
  static Literal str(std::string v) { return Literal{false, 0.0, std::move(v)}; }
  bool operator==(const Literal&) const = default;
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Atom {
  std::string variable;
  CompareOp op = CompareOp::eq;
  std::vector<Literal> values;  // one element except for IN
  int line = 0;                 // source position for diagnostics
  int col = 0;
};

// n-ary connectives are flattened by the parser ("a AND b AND c" is one node
// with three children); explicit parentheses produce nested nodes.
struct Expr {
  enum class Node { atom, con_and, con_or, con_not };

  Node node = Node::atom;
  Atom atom;                      // node == atom
  std::vector<ExprPtr> children;  // connectives

  static ExprPtr make_atom(Atom a);
  static ExprPtr make_not(ExprPtr child);
  static ExprPtr make_and(std::vector<ExprPtr> children);
  static ExprPtr make_or(std::vector<ExprPtr> children);

  ExprPtr clone() const;
};

bool equal(const Expr& a, const Expr& b);

struct Rule {
  ExprPtr condition;
  std::string version_id;
  int line = 0;
};

struct RuleSet {
  std::vector<Rule> rules;
  bool default_is_delegate = false;
  std::string default_target;  // version id, or delegate policy name

  RuleSet clone() const;
};

bool equal(const RuleSet& a, const RuleSet& b);

// Throws Error(dsl_syntax) with "line N, col M" context and the expected
// token set on malformed input.  No semantic checks happen here.
RuleSet parse_policy(const std::string& text);

// Deterministic pretty-printer; parse_policy(format_policy(r)) is
// structurally equal to r for every checkable rule set.
std::string format_policy(const RuleSet& ruleset);

struct Diagnostic {
  int rule_index = -1;  // -1 for the default clause
  int line = 0;
  int col = 0;
  std::string code;     // e.g. UnknownVariable, OrderingOnCategorical
  std::string message;

  // "file:line:col: code: message"
  std::string render(const std::string& file) const;
};

// Static checks against a mooclet and the variable schema: referenced
// versions exist, variables are registered, comparisons are type-correct
// (ordering operators only on numerics).  Empty result means well-formed.
std::vector<Diagnostic> check_policy(const RuleSet& ruleset, const Mooclet& mooclet,
                                     const VariableStore& schema);

struct Decision {
  enum class Kind { version, delegate };
  Kind kind = Kind::version;
  std::string target;       // version id or delegate policy name
  int matched_rule = -1;    // -1 when the default clause applied
};

// Pure evaluation: first rule whose condition holds under the profile wins;
// atoms over missing variables are false; otherwise the default applies.
Decision evaluate_rules(const RuleSet& ruleset, const Profile& profile);

}  // namespace mooclet::dsl

#endif  // MOOCLET_CORE_POLICY_DSL_HPP
