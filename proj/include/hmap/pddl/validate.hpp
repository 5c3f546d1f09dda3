#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmap/pddl/task.hpp"

namespace hmap::pddl {

enum class FailureKind { none, precondition, goal, unknown_action };

std::string_view to_string(FailureKind kind);

/// Outcome of checking a plan step by step. A failure is data, not an error.
struct ValidationReport {
  bool valid = true;
  FailureKind kind = FailureKind::none;
  std::optional<std::size_t> step;  // failing step index
  std::string action;               // failing action, `(schema args...)`
  std::string violated;             // first violated literal
  std::vector<std::string> unsatisfied_goals;
  std::vector<std::string> state;   // sorted snapshot where checking stopped
  std::string state_digest;

  nlohmann::json to_json() const;
  static ValidationReport from_json(const nlohmann::json& j);
  bool operator==(const ValidationReport&) const = default;
};

/// Plan given as action ids of `task`, checked from the task's initial state
/// against the task's goal.
ValidationReport validate_plan(const GroundTask& task, std::span<const ActionId> plan);

/// Plan given as action names, checked from `from` against `goal`. Unknown
/// names fail with FailureKind::unknown_action; goal atoms the task has never
/// seen count as false.
ValidationReport validate_plan(const GroundTask& task, const State& from,
                               std::span<const std::string> plan, std::span<const Literal> goal);

/// Grounds `domain`/`problem` and checks the named plan.
ValidationReport validate_plan(const Domain& domain, const Problem& problem,
                               std::span<const std::string> plan);

/// State reached by the longest applicable prefix of the plan.
State execute_prefix(const GroundTask& task, const State& from, std::span<const std::string> plan);

std::string state_digest(const std::vector<std::string>& sorted_atoms);

/// One JSON record per line.
void write_reports(const std::filesystem::path& path, std::span<const ValidationReport> reports);
std::vector<ValidationReport> read_reports(const std::filesystem::path& path);

}  // namespace hmap::pddl
