#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmap/pddl/ast.hpp"

namespace hmap::pddl {

using AtomId = std::uint32_t;
using ActionId = std::size_t;

/// Interns ground atoms to dense integer ids.
class AtomTable {
 public:
  AtomId intern(const Atom& atom);
  std::optional<AtomId> find(const Atom& atom) const;
  const Atom& atom(AtomId id) const { return atoms_.at(id); }
  std::size_t size() const { return atoms_.size(); }

 private:
  std::vector<Atom> atoms_;
  std::unordered_map<std::string, AtomId> index_;
};

/// A set of ground atoms, stored as a sorted id vector.
class State {
 public:
  State() = default;
  /// Sorts and deduplicates.
  explicit State(std::vector<AtomId> ids);

  bool contains(AtomId id) const;
  std::span<const AtomId> ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  State with(std::span<const AtomId> add, std::span<const AtomId> del) const;

  bool operator==(const State&) const = default;
  auto operator<=>(const State&) const = default;

 private:
  std::vector<AtomId> ids_;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept;
};

struct GroundAction {
  std::size_t schema_index = 0;
  std::string schema;
  std::vector<std::string> args;  // binding in parameter order
  std::string robot;              // first robot-typed argument, if any
  std::vector<AtomId> pre_pos;
  std::vector<AtomId> pre_neg;
  std::vector<AtomId> add;
  std::vector<AtomId> del;

  /// `(schema arg...)`
  std::string name() const;
};

class GroundingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GroundingOptions {
  std::size_t max_actions = 1'000'000;
  /// Type whose bindings name the acting robot.
  std::string robot_type = "robot";
};

/// Grounded domain/problem pair. Immutable after construction.
struct GroundTask {
  Domain domain;
  Problem problem;
  AtomTable atoms;
  std::vector<GroundAction> actions;
  State init;
  std::vector<AtomId> goal_pos;
  std::vector<AtomId> goal_neg;
  std::unordered_map<std::string, ActionId> by_name;

  std::optional<ActionId> find_action(std::string_view name) const;
  bool satisfies_goal(const State& s) const;
  std::string atom_str(AtomId id) const { return atoms.atom(id).str(); }
  std::vector<std::string> describe(const State& s) const;
  /// Literal -> (id, positive); nullopt when the atom is unknown to the task.
  std::optional<std::pair<AtomId, bool>> lookup(const Literal& lit) const;
};

/// Number of type-consistent bindings, without enumerating them.
std::size_t count_groundings(const Domain& domain, const Problem& problem);

/// Enumerates every type-consistent binding of every schema.
/// Throws GroundingError when the count exceeds `options.max_actions`.
GroundTask ground(const Domain& domain, const Problem& problem, const GroundingOptions& options = {});

bool applicable(const State& s, const GroundAction& a);

class InapplicableActionError : public std::runtime_error {
 public:
  InapplicableActionError(const std::string& action, const std::string& violated);
  const std::string& violated() const { return violated_; }

 private:
  std::string violated_;
};

/// (s ∪ add) \ del. Throws InapplicableActionError naming the first violated
/// precondition.
State apply(const GroundTask& task, const State& s, const GroundAction& a);

/// First violated precondition as a literal string, or nullopt.
std::optional<std::string> first_violation(const GroundTask& task, const State& s, const GroundAction& a);

}  // namespace hmap::pddl
