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

#include "core/policy_dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace mooclet::dsl {

const char* compare_op_text(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    case CompareOp::in: return "IN";
  }
  return "==";
}

ExprPtr Expr::make_atom(Atom a) {
  auto e = std::make_unique<Expr>();
  e->node = Node::atom;
  e->atom = std::move(a);
  return e;
}

ExprPtr Expr::make_not(ExprPtr child) {
  auto e = std::make_unique<Expr>();
  e->node = Node::con_not;
  e->children.push_back(std::move(child));
  return e;
}

ExprPtr Expr::make_and(std::vector<ExprPtr> children) {
  auto e = std::make_unique<Expr>();
  e->node = Node::con_and;
  e->children = std::move(children);
  return e;
}

ExprPtr Expr::make_or(std::vector<ExprPtr> children) {
  auto e = std::make_unique<Expr>();
  e->node = Node::con_or;
  e->children = std::move(children);
  return e;
}

ExprPtr Expr::clone() const {
  auto e = std::make_unique<Expr>();
  e->node = node;
  e->atom = atom;
  for (const auto& child : children) e->children.push_back(child->clone());
  return e;
}

bool equal(const Expr& a, const Expr& b) {
  if (a.node != b.node) return false;
  if (a.node == Expr::Node::atom) {
    return a.atom.variable == b.atom.variable && a.atom.op == b.atom.op &&
           a.atom.values == b.atom.values;
  }
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

RuleSet RuleSet::clone() const {
  RuleSet out;
  out.default_is_delegate = default_is_delegate;
  out.default_target = default_target;
  for (const auto& rule : rules) {
    out.rules.push_back(Rule{rule.condition->clone(), rule.version_id, rule.line});
  }
  return out;
}

bool equal(const RuleSet& a, const RuleSet& b) {
  if (a.rules.size() != b.rules.size()) return false;
  if (a.default_is_delegate != b.default_is_delegate) return false;
  if (a.default_target != b.default_target) return false;
  for (std::size_t i = 0; i < a.rules.size(); ++i) {
    if (a.rules[i].version_id != b.rules[i].version_id) return false;
    if (!equal(*a.rules[i].condition, *b.rules[i].condition)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  kw_if, kw_then, kw_default, kw_policy, kw_in, kw_and, kw_or, kw_not,
  ident, number, string,
  op_eq, op_ne, op_lt, op_le, op_gt, op_ge,
  lparen, rparen, lbrace, rbrace, comma, semicolon,
  end,
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::kw_if: return "'IF'";
    case Tok::kw_then: return "'THEN'";
    case Tok::kw_default: return "'DEFAULT'";
    case Tok::kw_policy: return "'POLICY'";
    case Tok::kw_in: return "'IN'";
    case Tok::kw_and: return "'AND'";
    case Tok::kw_or: return "'OR'";
    case Tok::kw_not: return "'NOT'";
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::string: return "string";
    case Tok::op_eq: return "'=='";
    case Tok::op_ne: return "'!='";
    case Tok::op_lt: return "'<'";
    case Tok::op_le: return "'<='";
    case Tok::op_gt: return "'>'";
    case Tok::op_ge: return "'>='";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::comma: return "','";
    case Tok::semicolon: return "';'";
    case Tok::end: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::end;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

[[noreturn]] void syntax_error(int line, int col, const std::string& message) {
  std::ostringstream os;
  os << "line " << line << ", col " << col << ": " << message;
  fail(Errc::dsl_syntax, os.str());
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= text_.size()) {
      t.kind = Tok::end;
      return t;
    }
    const char ch = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return lex_word(t);
    if (std::isdigit(static_cast<unsigned char>(ch)) ||
        (ch == '-' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      return lex_number(t);
    }
    if (ch == '"') return lex_string(t);
    return lex_symbol(t);
  }

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (ch == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  Token lex_word(Token t) {
    std::string word;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      word.push_back(text_[pos_]);
      advance();
    }
    if (word == "IF") t.kind = Tok::kw_if;
    else if (word == "THEN") t.kind = Tok::kw_then;
    else if (word == "DEFAULT") t.kind = Tok::kw_default;
    else if (word == "POLICY") t.kind = Tok::kw_policy;
    else if (word == "IN") t.kind = Tok::kw_in;
    else if (word == "AND") t.kind = Tok::kw_and;
    else if (word == "OR") t.kind = Tok::kw_or;
    else if (word == "NOT") t.kind = Tok::kw_not;
    else t.kind = Tok::ident;
    t.text = std::move(word);
    return t;
  }

  Token lex_number(Token t) {
    std::string digits;
    if (text_[pos_] == '-') {
      digits.push_back('-');
      advance();
    }
    bool seen_dot = false;
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        digits.push_back(ch);
        advance();
      } else if (ch == '.' && !seen_dot) {
        seen_dot = true;
        digits.push_back(ch);
        advance();
      } else {
        break;
      }
    }
    double value = 0.0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) {
      syntax_error(t.line, t.col, "malformed number '" + digits + "'");
    }
    t.kind = Tok::number;
    t.number = value;
    t.text = std::move(digits);
    return t;
  }

  Token lex_string(Token t) {
    advance();  // opening quote
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) syntax_error(t.line, t.col, "unterminated string literal");
      const char ch = text_[pos_];
      if (ch == '"') {
        advance();
        break;
      }
      if (ch == '\\') {
        advance();
        if (pos_ >= text_.size()) syntax_error(t.line, t.col, "unterminated string literal");
        const char esc = text_[pos_];
        if (esc == '"' || esc == '\\') out.push_back(esc);
        else syntax_error(line_, col_, std::string("unknown escape '\\") + esc + "'");
        advance();
      } else if (ch == '\n') {
        syntax_error(t.line, t.col, "unterminated string literal");
      } else {
        out.push_back(ch);
        advance();
      }
    }
    t.kind = Tok::string;
    t.text = std::move(out);
    return t;
  }

  Token lex_symbol(Token t) {
    const char ch = text_[pos_];
    auto two = [&](char second) {
      return pos_ + 1 < text_.size() && text_[pos_ + 1] == second;
    };
    switch (ch) {
      case '=':
        if (two('=')) { advance(); advance(); t.kind = Tok::op_eq; return t; }
        syntax_error(t.line, t.col, "expected '==' (single '=' is not an operator)");
      case '!':
        if (two('=')) { advance(); advance(); t.kind = Tok::op_ne; return t; }
        syntax_error(t.line, t.col, "expected '!='");
      case '<':
        advance();
        if (pos_ < text_.size() && text_[pos_] == '=') { advance(); t.kind = Tok::op_le; }
        else t.kind = Tok::op_lt;
        return t;
      case '>':
        advance();
        if (pos_ < text_.size() && text_[pos_] == '=') { advance(); t.kind = Tok::op_ge; }
        else t.kind = Tok::op_gt;
        return t;
      case '(': advance(); t.kind = Tok::lparen; return t;
      case ')': advance(); t.kind = Tok::rparen; return t;
      case '{': advance(); t.kind = Tok::lbrace; return t;
      case '}': advance(); t.kind = Tok::rbrace; return t;
      case ',': advance(); t.kind = Tok::comma; return t;
      case ';': advance(); t.kind = Tok::semicolon; return t;
      default:
        syntax_error(t.line, t.col, std::string("unexpected character '") + ch + "'");
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser (recursive descent, LL(1))

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) { look_ = lexer_.next(); }

  RuleSet parse() {
    RuleSet out;
    while (look_.kind == Tok::kw_if) {
      out.rules.push_back(parse_rule());
    }
    if (look_.kind != Tok::kw_default) {
      expected("'IF' or 'DEFAULT'");
    }
    const int line = look_.line;
    consume();  // DEFAULT
    if (look_.kind == Tok::kw_policy) {
      consume();
      out.default_is_delegate = true;
      out.default_target = expect_ident("delegate policy name");
    } else {
      out.default_is_delegate = false;
      out.default_target = expect_ident("default version id");
    }
    expect(Tok::semicolon);
    if (look_.kind != Tok::end) {
      syntax_error(look_.line, look_.col,
                   "unexpected " + std::string(tok_name(look_.kind)) +
                       " after the DEFAULT clause (line " + std::to_string(line) + ")");
    }
    return out;
  }

 private:
  void consume() { look_ = lexer_.next(); }

  [[noreturn]] void expected(const std::string& what) {
    syntax_error(look_.line, look_.col,
                 "expected " + what + ", found " + tok_name(look_.kind));
  }

  void expect(Tok kind) {
    if (look_.kind != kind) expected(tok_name(kind));
    consume();
  }

  std::string expect_ident(const std::string& what) {
    if (look_.kind != Tok::ident) expected(what);
    std::string text = look_.text;
    consume();
    return text;
  }

  Rule parse_rule() {
    Rule rule;
    rule.line = look_.line;
    expect(Tok::kw_if);
    rule.condition = parse_or();
    expect(Tok::kw_then);
    rule.version_id = expect_ident("version id");
    expect(Tok::semicolon);
    return rule;
  }

  ExprPtr parse_or() {
    std::vector<ExprPtr> parts;
    parts.push_back(parse_and());
    while (look_.kind == Tok::kw_or) {
      consume();
      parts.push_back(parse_and());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return Expr::make_or(std::move(parts));
  }

  ExprPtr parse_and() {
    std::vector<ExprPtr> parts;
    parts.push_back(parse_not());
    while (look_.kind == Tok::kw_and) {
      consume();
      parts.push_back(parse_not());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return Expr::make_and(std::move(parts));
  }

  ExprPtr parse_not() {
    if (look_.kind == Tok::kw_not) {
      consume();
      return Expr::make_not(parse_not());
    }
    if (look_.kind == Tok::lparen) {
      consume();
      ExprPtr inner = parse_or();
      expect(Tok::rparen);
      return inner;
    }
    return Expr::make_atom(parse_atom());
  }

  Literal parse_literal() {
    if (look_.kind == Tok::number) {
      Literal lit = Literal::num(look_.number);
      consume();
      return lit;
    }
    if (look_.kind == Tok::string) {
      Literal lit = Literal::str(look_.text);
      consume();
      return lit;
    }
    expected("literal (number or string)");
  }

  Atom parse_atom() {
    Atom atom;
    atom.line = look_.line;
    atom.col = look_.col;
    atom.variable = expect_ident("variable name");
    switch (look_.kind) {
      case Tok::op_eq: atom.op = CompareOp::eq; consume(); break;
      case Tok::op_ne: atom.op = CompareOp::ne; consume(); break;
      case Tok::op_lt: atom.op = CompareOp::lt; consume(); break;
      case Tok::op_le: atom.op = CompareOp::le; consume(); break;
      case Tok::op_gt: atom.op = CompareOp::gt; consume(); break;
      case Tok::op_ge: atom.op = CompareOp::ge; consume(); break;
      case Tok::kw_in: {
        atom.op = CompareOp::in;
        consume();
        expect(Tok::lbrace);
        atom.values.push_back(parse_literal());
        while (look_.kind == Tok::comma) {
          consume();
          atom.values.push_back(parse_literal());
        }
        expect(Tok::rbrace);
        return atom;
      }
      default:
        expected("comparison operator or 'IN'");
    }
    atom.values.push_back(parse_literal());
    return atom;
  }

  Lexer lexer_;
  Token look_;
};

}  // namespace

RuleSet parse_policy(const std::string& text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string format_number(double v) {
  // Shortest fixed-notation decimal that round-trips; the grammar has no
  // exponent form.
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

std::string format_literal(const Literal& lit) {
  if (lit.is_number) return format_number(lit.number);
  std::string out = "\"";
  for (char ch : lit.text) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void print_expr(const Expr& expr, std::string& out);

void print_child(const Expr& child, std::string& out) {
  const bool needs_parens =
      child.node == Expr::Node::con_and || child.node == Expr::Node::con_or;
  if (needs_parens) out.push_back('(');
  print_expr(child, out);
  if (needs_parens) out.push_back(')');
}

void print_expr(const Expr& expr, std::string& out) {
  switch (expr.node) {
    case Expr::Node::atom: {
      const Atom& a = expr.atom;
      out += a.variable;
      if (a.op == CompareOp::in) {
        out += " IN {";
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          if (i > 0) out += ", ";
          out += format_literal(a.values[i]);
        }
        out += "}";
      } else {
        out += " ";
        out += compare_op_text(a.op);
        out += " ";
        out += format_literal(a.values.front());
      }
      break;
    }
    case Expr::Node::con_not:
      out += "NOT ";
      print_child(*expr.children.front(), out);
      break;
    case Expr::Node::con_and:
      for (std::size_t i = 0; i < expr.children.size(); ++i) {
        if (i > 0) out += " AND ";
        print_child(*expr.children[i], out);
      }
      break;
    case Expr::Node::con_or:
      for (std::size_t i = 0; i < expr.children.size(); ++i) {
        if (i > 0) out += " OR ";
        print_child(*expr.children[i], out);
      }
      break;
  }
}

}  // namespace

std::string format_policy(const RuleSet& ruleset) {
  std::string out;
  for (const auto& rule : ruleset.rules) {
    out += "IF ";
    print_expr(*rule.condition, out);
    out += " THEN ";
    out += rule.version_id;
    out += ";\n";
  }
  out += "DEFAULT ";
  if (ruleset.default_is_delegate) out += "POLICY ";
  out += ruleset.default_target;
  out += ";\n";
  return out;
}

// ---------------------------------------------------------------------------
// Checker

std::string Diagnostic::render(const std::string& file) const {
  std::ostringstream os;
  os << file << ":" << line << ":" << col << ": " << code << ": " << message;
  return os.str();
}

namespace {

void check_expr(const Expr& expr, int rule_index, const VariableStore& schema,
                std::vector<Diagnostic>& out) {
  if (expr.node != Expr::Node::atom) {
    for (const auto& child : expr.children) check_expr(*child, rule_index, schema, out);
    return;
  }
  const Atom& atom = expr.atom;
  auto diag = [&](std::string code, std::string message) {
    out.push_back(Diagnostic{rule_index, atom.line, atom.col, std::move(code), std::move(message)});
  };

  const VariableDef* def = schema.find(atom.variable);
  if (!def) {
    diag("UnknownVariable", "variable '" + atom.variable + "' is not registered");
    return;
  }

  const bool ordering = atom.op == CompareOp::lt || atom.op == CompareOp::le ||
                        atom.op == CompareOp::gt || atom.op == CompareOp::ge;
  if (ordering && def->kind == VarKind::categorical) {
    diag("OrderingOnCategorical",
         "ordering comparison on categorical variable '" + atom.variable + "'");
    return;
  }
  if (ordering && def->kind == VarKind::binary) {
    diag("OrderingOnBinary", "ordering comparison on binary variable '" + atom.variable + "'");
    return;
  }

  for (const auto& lit : atom.values) {
    switch (def->kind) {
      case VarKind::numeric:
        if (!lit.is_number) {
          diag("TypeMismatch", "variable '" + atom.variable + "' is numeric but compared to a string");
        }
        break;
      case VarKind::binary:
        if (!lit.is_number || (lit.number != 0.0 && lit.number != 1.0)) {
          diag("TypeMismatch", "variable '" + atom.variable + "' is binary; compare to 0 or 1");
        }
        break;
      case VarKind::categorical:
        if (lit.is_number) {
          diag("TypeMismatch",
               "variable '" + atom.variable + "' is categorical but compared to a number");
        } else if (std::find(def->categories.begin(), def->categories.end(), lit.text) ==
                   def->categories.end()) {
          diag("UnknownCategory",
               "'" + lit.text + "' is not a declared category of '" + atom.variable + "'");
        }
        break;
    }
  }
}

}  // namespace

std::vector<Diagnostic> check_policy(const RuleSet& ruleset, const Mooclet& mooclet,
                                     const VariableStore& schema) {
  std::vector<Diagnostic> out;
  for (std::size_t i = 0; i < ruleset.rules.size(); ++i) {
    const Rule& rule = ruleset.rules[i];
    if (!mooclet.has_version(rule.version_id)) {
      out.push_back(Diagnostic{static_cast<int>(i), rule.line, 1, "UnknownVersion",
                               "version '" + rule.version_id + "' does not exist in mooclet '" +
                                   mooclet.id + "'"});
    }
    check_expr(*rule.condition, static_cast<int>(i), schema, out);
  }
  if (!ruleset.default_is_delegate && !mooclet.has_version(ruleset.default_target)) {
    out.push_back(Diagnostic{-1, 0, 0, "UnknownVersion",
                             "default version '" + ruleset.default_target +
                                 "' does not exist in mooclet '" + mooclet.id + "'"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluator

namespace {

bool eval_atom(const Atom& atom, const Profile& profile) {
  auto it = profile.find(atom.variable);
  if (it == profile.end()) return false;  // missing variable: atom is false
  const Value& value = it->second;

  auto matches = [&](const Literal& lit) {
    if (lit.is_number != value.is_number()) return false;
    return lit.is_number ? value.num == lit.number : value.text == lit.text;
  };

  switch (atom.op) {
    case CompareOp::eq: return matches(atom.values.front());
    case CompareOp::ne: {
      const Literal& lit = atom.values.front();
      if (lit.is_number != value.is_number()) return false;  // incomparable, not "different"
      return !matches(lit);
    }
    case CompareOp::in:
      for (const auto& lit : atom.values) {
        if (matches(lit)) return true;
      }
      return false;
    case CompareOp::lt:
    case CompareOp::le:
    case CompareOp::gt:
    case CompareOp::ge: {
      const Literal& lit = atom.values.front();
      if (!lit.is_number || !value.is_number()) return false;
      switch (atom.op) {
        case CompareOp::lt: return value.num < lit.number;
        case CompareOp::le: return value.num <= lit.number;
        case CompareOp::gt: return value.num > lit.number;
        case CompareOp::ge: return value.num >= lit.number;
        default: return false;
      }
    }
  }
  return false;
}

bool eval_expr(const Expr& expr, const Profile& profile) {
  switch (expr.node) {
    case Expr::Node::atom:
      return eval_atom(expr.atom, profile);
    case Expr::Node::con_not:
      return !eval_expr(*expr.children.front(), profile);
    case Expr::Node::con_and:
      for (const auto& child : expr.children) {
        if (!eval_expr(*child, profile)) return false;
      }
      return true;
    case Expr::Node::con_or:
      for (const auto& child : expr.children) {
        if (eval_expr(*child, profile)) return true;
      }
      return false;
  }
  return false;
}

}  // namespace

Decision evaluate_rules(const RuleSet& ruleset, const Profile& profile) {
  for (std::size_t i = 0; i < ruleset.rules.size(); ++i) {
    if (eval_expr(*ruleset.rules[i].condition, profile)) {
      return Decision{Decision::Kind::version, ruleset.rules[i].version_id,
                      static_cast<int>(i)};
    }
  }
  return Decision{ruleset.default_is_delegate ? Decision::Kind::delegate
                                              : Decision::Kind::version,
                  ruleset.default_target, -1};
}

}  // namespace mooclet::dsl
