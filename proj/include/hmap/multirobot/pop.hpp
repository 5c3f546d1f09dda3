#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hmap/pddl/task.hpp"
#include "hmap/pddl/validate.hpp"

namespace hmap::multirobot {

class CycleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A robot-tagged ground action with its atoms spelled out, so steps coming
/// from different grounded problems can be compared.
struct PlanStep {
  std::string robot;
  std::string name;
  std::vector<std::string> pre;  // positive and negative preconditions, by atom
  std::vector<std::string> add;
  std::vector<std::string> del;

  static PlanStep from(const pddl::GroundTask& task, const pddl::GroundAction& action);
  bool operator==(const PlanStep&) const = default;
};

/// Sequential plan of one robot for one subtask.
struct SubPlan {
  std::size_t subtask = 0;
  std::string robot;
  std::vector<PlanStep> steps;
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Actions with a strict partial order given by `edges` (before, after).
struct PartialOrderPlan {
  std::vector<PlanStep> actions;
  std::vector<Edge> edges;
  /// Position of each action within its robot's chain.
  std::vector<std::size_t> chain_index;

  std::size_t size() const { return actions.size(); }
  /// Topological order preferring (robot, chain index). Throws CycleError.
  std::vector<std::size_t> canonical_order() const;
  std::vector<std::string> canonical_names() const;
  bool has_edge(std::size_t before, std::size_t after) const;

  nlohmann::json to_json() const;
  static PartialOrderPlan from_json(const nlohmann::json& j);
};

/// Topological order of `n` subtasks under `deps` (before, after); ties go to
/// the lower index. Throws CycleError.
std::vector<std::size_t> subtask_order(std::size_t n, std::span<const Edge> deps);

/// Two steps conflict when one adds or deletes an atom the other reads or writes.
bool conflicts(const PlanStep& a, const PlanStep& b);

/// Chains each robot's steps in subtask order and adds a cross-robot edge for
/// every conflicting pair, oriented by the subtask order. `deps` refers to
/// SubPlan::subtask values in [0, n_subtasks).
PartialOrderPlan merge_subplans(std::span<const SubPlan> subplans, std::size_t n_subtasks,
                                std::span<const Edge> deps);

/// Longest chain, counted in actions. Throws CycleError.
std::size_t makespan(const PartialOrderPlan& plan);

/// Checks the steps in `order` against the environment task from `from`.
pddl::ValidationReport validate_order(const pddl::GroundTask& env, const pddl::State& from,
                                      const PartialOrderPlan& plan, std::span<const std::size_t> order,
                                      std::span<const pddl::Literal> goal);

}  // namespace hmap::multirobot
