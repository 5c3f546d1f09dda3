#pragma once

#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hmap::pddl {

/// A (possibly parameterized) atom `(predicate arg...)`. Arguments starting
/// with '?' are parameters; everything else is an object or constant.
struct Atom {
  std::string predicate;
  std::vector<std::string> args;

  std::string str() const;
  bool is_ground() const;
  auto operator<=>(const Atom&) const = default;
};

/// Signed atom. Used for preconditions, effects and goals.
struct Literal {
  Atom atom;
  bool positive = true;

  std::string str() const;
  auto operator<=>(const Literal&) const = default;
};

/// `name - type`. Also used for the type hierarchy (type name, parent type).
struct TypedName {
  std::string name;
  std::string type;
  auto operator<=>(const TypedName&) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedName> params;
  auto operator<=>(const PredicateDecl&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedName> params;
  std::vector<Literal> pre;
  std::vector<Literal> eff;
  bool operator==(const ActionSchema&) const = default;
};

inline constexpr std::string_view kRootType = "object";

struct Domain {
  std::string name;
  std::vector<std::string> requirements;
  std::vector<TypedName> types;  // (type, parent)
  std::vector<TypedName> constants;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;

  const ActionSchema* find_action(std::string_view name) const;
  const PredicateDecl* find_predicate(std::string_view name) const;
  bool has_type(std::string_view type) const;
  /// Reflexive, transitive subtype test; every type is a subtype of "object".
  bool is_subtype(std::string_view type, std::string_view ancestor) const;

  bool operator==(const Domain&) const = default;
};

struct Problem {
  std::string name;
  std::string domain_name;
  std::vector<TypedName> objects;
  std::vector<Atom> init;
  std::vector<Literal> goal;

  bool operator==(const Problem&) const = default;
};

/// Domain/problem invariant violation (arity, unknown names, cycles, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ModelError when a domain breaks one of its structural invariants.
void check_domain(const Domain& domain);
/// Throws ModelError when a problem refers to undeclared predicates/objects.
void check_problem(const Domain& domain, const Problem& problem);

/// Objects usable in a problem: domain constants followed by problem objects.
std::vector<TypedName> all_objects(const Domain& domain, const Problem& problem);

}  // namespace hmap::pddl
