#include "hmap/pddl/parser.hpp"

#include <array>
#include <cctype>
#include <optional>
#include <sstream>

#include "hmap/util/text.hpp"

namespace hmap::pddl {

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      detail_(message),
      line_(line),
      column_(column) {}

UnsupportedRequirementError::UnsupportedRequirementError(const std::string& requirement, int line,
                                                         int column)
    : ParseError("unsupported requirement " + requirement, line, column), requirement_(requirement) {}

bool is_supported_requirement(std::string_view requirement) {
  static constexpr std::array<std::string_view, 3> kSupported = {":strips", ":typing",
                                                                 ":negative-preconditions"};
  for (auto r : kSupported) {
    if (r == requirement) return true;
  }
  return false;
}

namespace {

struct SExpr {
  bool is_list = false;
  std::string token;
  std::vector<SExpr> items;
  int line = 1;
  int column = 1;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SExpr read_top() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty input", line_, col_);
    SExpr e = read();
    skip_space();
    if (pos_ < text_.size()) throw ParseError("unexpected text after closing parenthesis", line_, col_);
    return e;
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
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", line_, col_);
    SExpr e;
    e.line = line_;
    e.column = col_;
    const char c = text_[pos_];
    if (c == ')') throw ParseError("unexpected ')'", line_, col_);
    if (c == '(') {
      e.is_list = true;
      advance();
      while (true) {
        skip_space();
        if (pos_ >= text_.size()) {
          throw ParseError("unbalanced parentheses: list opened at " + std::to_string(e.line) + ":" +
                               std::to_string(e.column) + " is never closed",
                           line_, col_);
        }
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        e.items.push_back(read());
      }
      return e;
    }
    std::string tok;
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d))) break;
      tok.push_back(d);
      advance();
    }
    e.token = util::to_lower(tok);
    return e;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

[[noreturn]] void fail(const SExpr& at, const std::string& msg) { throw ParseError(msg, at.line, at.column); }

const std::string& expect_token(const SExpr& e, const char* what) {
  if (e.is_list) fail(e, std::string("expected ") + what + ", found a list");
  return e.token;
}

bool is_head(const SExpr& e, std::string_view head) {
  return e.is_list && !e.items.empty() && !e.items[0].is_list && e.items[0].token == head;
}

bool is_name(std::string_view s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

bool is_variable(std::string_view s) { return s.size() > 1 && s[0] == '?' && is_name(s.substr(1)); }

/// `a b - t c - u d` -> [(a,t) (b,t) (c,u) (d,object)]
std::vector<TypedName> read_typed_list(const std::vector<SExpr>& items, std::size_t begin,
                                       bool variables) {
  std::vector<TypedName> out;
  std::vector<std::pair<std::string, const SExpr*>> pending;
  for (std::size_t i = begin; i < items.size(); ++i) {
    const SExpr& e = items[i];
    if (e.is_list) {
      if (is_head(e, "either")) fail(e, "'either' types are not supported");
      fail(e, "unexpected list in typed list");
    }
    if (e.token == "-") {
      if (i + 1 >= items.size()) fail(e, "missing type after '-'");
      if (pending.empty()) fail(e, "'-' without preceding names");
      const SExpr& t = items[i + 1];
      if (t.is_list && is_head(t, "either")) fail(t, "'either' types are not supported");
      const std::string& type = expect_token(t, "type name");
      if (!is_name(type)) fail(t, "invalid type name '" + type + "'");
      for (auto& [n, _] : pending) out.push_back({n, type});
      pending.clear();
      ++i;
      continue;
    }
    if (variables ? !is_variable(e.token) : !is_name(e.token)) {
      fail(e, std::string("invalid ") + (variables ? "parameter" : "name") + " '" + e.token + "'");
    }
    pending.emplace_back(e.token, &e);
  }
  for (auto& [n, _] : pending) out.push_back({n, std::string(kRootType)});
  return out;
}

Atom read_atom(const SExpr& e, bool allow_variables) {
  if (!e.is_list || e.items.empty()) fail(e, "expected an atom '(predicate args...)'");
  Atom a;
  a.predicate = expect_token(e.items[0], "predicate name");
  if (a.predicate == "and" || a.predicate == "not") fail(e, "expected an atom, found '" + a.predicate + "'");
  if (a.predicate == "=") fail(e, "equality atoms are not supported");
  if (a.predicate == "or" || a.predicate == "imply" || a.predicate == "exists" ||
      a.predicate == "forall" || a.predicate == "when") {
    fail(e, "'" + a.predicate + "' is outside the supported STRIPS subset");
  }
  if (!is_name(a.predicate)) fail(e.items[0], "invalid predicate name '" + a.predicate + "'");
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    const std::string& arg = expect_token(e.items[i], "argument");
    if (is_variable(arg)) {
      if (!allow_variables) fail(e.items[i], "parameter '" + arg + "' in a ground atom");
    } else if (!is_name(arg)) {
      fail(e.items[i], "invalid argument '" + arg + "'");
    }
    a.args.push_back(arg);
  }
  return a;
}

Literal read_literal(const SExpr& e, bool allow_variables) {
  if (is_head(e, "not")) {
    if (e.items.size() != 2) fail(e, "'not' takes exactly one atom");
    return Literal{read_atom(e.items[1], allow_variables), false};
  }
  return Literal{read_atom(e, allow_variables), true};
}

/// `()` | literal | `(and literal...)`
std::vector<Literal> read_conjunction(const SExpr& e, bool allow_variables) {
  if (!e.is_list) fail(e, "expected a condition list");
  if (e.items.empty()) return {};
  if (is_head(e, "and")) {
    std::vector<Literal> out;
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      const SExpr& sub = e.items[i];
      if (is_head(sub, "and")) {
        auto nested = read_conjunction(sub, allow_variables);
        out.insert(out.end(), nested.begin(), nested.end());
      } else {
        out.push_back(read_literal(sub, allow_variables));
      }
    }
    return out;
  }
  return {read_literal(e, allow_variables)};
}

void check_requirements(const SExpr& e, std::vector<std::string>& out) {
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    const std::string& r = expect_token(e.items[i], "requirement");
    if (!is_supported_requirement(r)) {
      throw UnsupportedRequirementError(r, e.items[i].line, e.items[i].column);
    }
    out.push_back(r);
  }
}

bool declares(const std::vector<std::string>& reqs, std::string_view r) {
  for (const auto& x : reqs) {
    if (x == r) return true;
  }
  return false;
}

ActionSchema read_action(const SExpr& e) {
  ActionSchema a;
  if (e.items.size() < 2) fail(e, "action without a name");
  a.name = expect_token(e.items[1], "action name");
  if (!is_name(a.name)) fail(e.items[1], "invalid action name '" + a.name + "'");
  bool seen_params = false;
  bool seen_pre = false;
  bool seen_eff = false;
  for (std::size_t i = 2; i < e.items.size(); i += 2) {
    const SExpr& key = e.items[i];
    const std::string& k = expect_token(key, "action keyword");
    if (i + 1 >= e.items.size()) fail(key, "missing value for " + k);
    const SExpr& val = e.items[i + 1];
    if (k == ":parameters") {
      if (seen_params) fail(key, "duplicate :parameters");
      if (!val.is_list) fail(val, "expected a parameter list");
      a.params = read_typed_list(val.items, 0, true);
      seen_params = true;
    } else if (k == ":precondition") {
      if (seen_pre) fail(key, "duplicate :precondition");
      a.pre = read_conjunction(val, true);
      seen_pre = true;
    } else if (k == ":effect") {
      if (seen_eff) fail(key, "duplicate :effect");
      a.eff = read_conjunction(val, true);
      seen_eff = true;
    } else {
      fail(key, "unsupported action keyword '" + k + "'");
    }
  }
  return a;
}

template <typename Fn>
void wrap_model_errors(const SExpr& at, Fn&& fn) {
  try {
    fn();
  } catch (const ModelError& err) {
    throw ParseError(err.what(), at.line, at.column);
  }
}

}  // namespace

Domain parse_domain(std::string_view text) {
  const SExpr top = Reader(text).read_top();
  if (!is_head(top, "define")) fail(top, "expected '(define (domain ...) ...)'");
  if (top.items.size() < 2 || !is_head(top.items[1], "domain") || top.items[1].items.size() != 2) {
    fail(top, "expected '(domain <name>)' after define");
  }
  Domain d;
  d.name = expect_token(top.items[1].items[1], "domain name");
  bool seen_types = false;
  bool seen_constants = false;
  bool seen_predicates = false;
  for (std::size_t i = 2; i < top.items.size(); ++i) {
    const SExpr& sec = top.items[i];
    if (!sec.is_list || sec.items.empty()) fail(sec, "expected a domain section");
    const std::string& head = expect_token(sec.items[0], "section keyword");
    if (head == ":requirements") {
      check_requirements(sec, d.requirements);
    } else if (head == ":types") {
      if (seen_types) fail(sec, "duplicate :types section");
      seen_types = true;
      d.types = read_typed_list(sec.items, 1, false);
    } else if (head == ":constants") {
      if (seen_constants) fail(sec, "duplicate :constants section");
      seen_constants = true;
      d.constants = read_typed_list(sec.items, 1, false);
    } else if (head == ":predicates") {
      if (seen_predicates) fail(sec, "duplicate :predicates section");
      seen_predicates = true;
      for (std::size_t j = 1; j < sec.items.size(); ++j) {
        const SExpr& p = sec.items[j];
        if (!p.is_list || p.items.empty()) fail(p, "expected a predicate declaration");
        PredicateDecl decl;
        decl.name = expect_token(p.items[0], "predicate name");
        if (!is_name(decl.name)) fail(p.items[0], "invalid predicate name '" + decl.name + "'");
        decl.params = read_typed_list(p.items, 1, true);
        d.predicates.push_back(std::move(decl));
      }
    } else if (head == ":action") {
      d.actions.push_back(read_action(sec));
      const ActionSchema& a = d.actions.back();
      if (!declares(d.requirements, ":negative-preconditions")) {
        for (const auto& l : a.pre) {
          if (!l.positive) {
            fail(sec, "action '" + a.name + "' uses a negative precondition without :negative-preconditions");
          }
        }
      }
    } else if (head == ":functions" || head == ":durative-action" || head == ":derived") {
      fail(sec, "section '" + head + "' is outside the supported STRIPS subset");
    } else {
      fail(sec, "unknown domain section '" + head + "'");
    }
  }
  wrap_model_errors(top, [&] { check_domain(d); });
  return d;
}

Problem parse_problem(std::string_view text) {
  const SExpr top = Reader(text).read_top();
  if (!is_head(top, "define")) fail(top, "expected '(define (problem ...) ...)'");
  if (top.items.size() < 2 || !is_head(top.items[1], "problem") || top.items[1].items.size() != 2) {
    fail(top, "expected '(problem <name>)' after define");
  }
  Problem p;
  p.name = expect_token(top.items[1].items[1], "problem name");
  bool seen_init = false;
  bool seen_goal = false;
  for (std::size_t i = 2; i < top.items.size(); ++i) {
    const SExpr& sec = top.items[i];
    if (!sec.is_list || sec.items.empty()) fail(sec, "expected a problem section");
    const std::string& head = expect_token(sec.items[0], "section keyword");
    if (head == ":domain") {
      if (sec.items.size() != 2) fail(sec, "expected '(:domain <name>)'");
      p.domain_name = expect_token(sec.items[1], "domain name");
    } else if (head == ":requirements") {
      std::vector<std::string> ignored;
      check_requirements(sec, ignored);
    } else if (head == ":objects") {
      auto objs = read_typed_list(sec.items, 1, false);
      p.objects.insert(p.objects.end(), objs.begin(), objs.end());
    } else if (head == ":init") {
      if (seen_init) fail(sec, "duplicate :init section");
      seen_init = true;
      for (std::size_t j = 1; j < sec.items.size(); ++j) {
        const SExpr& a = sec.items[j];
        if (is_head(a, "not")) fail(a, "negative literals are not allowed in :init");
        Atom atom = read_atom(a, false);
        bool dup = false;
        for (const auto& x : p.init) dup = dup || x == atom;
        if (!dup) p.init.push_back(std::move(atom));
      }
    } else if (head == ":goal") {
      if (seen_goal) fail(sec, "duplicate :goal section");
      seen_goal = true;
      if (sec.items.size() != 2) fail(sec, "expected exactly one goal formula");
      p.goal = read_conjunction(sec.items[1], false);
    } else if (head == ":metric") {
      fail(sec, "':metric' is outside the supported STRIPS subset");
    } else {
      fail(sec, "unknown problem section '" + head + "'");
    }
  }
  if (!seen_goal) fail(top, "problem without a :goal section");
  return p;
}

Problem parse_problem(std::string_view text, const Domain& domain) {
  Problem p = parse_problem(text);
  try {
    check_problem(domain, p);
  } catch (const ModelError& err) {
    throw ParseError(err.what(), 1, 1);
  }
  return p;
}

namespace {

void write_typed(std::ostringstream& out, const std::vector<TypedName>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out << ' ';
    out << names[i].name << " - " << names[i].type;
  }
}

void write_conjunction(std::ostringstream& out, const std::vector<Literal>& lits) {
  if (lits.empty()) {
    out << "()";
    return;
  }
  out << "(and";
  for (const auto& l : lits) out << ' ' << l.str();
  out << ')';
}

}  // namespace

std::string serialize(const Domain& d) {
  std::ostringstream out;
  out << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    out << "  (:requirements";
    for (const auto& r : d.requirements) out << ' ' << r;
    out << ")\n";
  }
  if (!d.types.empty()) {
    out << "  (:types ";
    write_typed(out, d.types);
    out << ")\n";
  }
  if (!d.constants.empty()) {
    out << "  (:constants ";
    write_typed(out, d.constants);
    out << ")\n";
  }
  out << "  (:predicates";
  for (const auto& p : d.predicates) {
    out << "\n    (" << p.name;
    if (!p.params.empty()) out << ' ';
    write_typed(out, p.params);
    out << ')';
  }
  out << ")\n";
  for (const auto& a : d.actions) {
    out << "  (:action " << a.name << "\n";
    out << "    :parameters (";
    write_typed(out, a.params);
    out << ")\n";
    out << "    :precondition ";
    write_conjunction(out, a.pre);
    out << "\n    :effect ";
    write_conjunction(out, a.eff);
    out << ")\n";
  }
  out << ")\n";
  return out.str();
}

std::string serialize(const Problem& p) {
  std::ostringstream out;
  out << "(define (problem " << p.name << ")\n";
  if (!p.domain_name.empty()) out << "  (:domain " << p.domain_name << ")\n";
  out << "  (:objects";
  if (!p.objects.empty()) out << ' ';
  write_typed(out, p.objects);
  out << ")\n";
  out << "  (:init";
  for (const auto& a : p.init) out << "\n    " << a.str();
  out << ")\n";
  out << "  (:goal ";
  write_conjunction(out, p.goal);
  out << "))\n";
  return out.str();
}

}  // namespace hmap::pddl
