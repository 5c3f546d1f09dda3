#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hmap/pddl/task.hpp"
#include "hmap/pddl/validate.hpp"

namespace hmap::planner {

struct SearchBudget {
  std::size_t max_expansions = 100'000;
  std::chrono::milliseconds max_wall{10'000};
};

/// Sequential plan: action ids into the GroundTask it was computed for.
struct Plan {
  std::vector<pddl::ActionId> steps;
  std::size_t expanded = 0;
};

/// The reachable state space was exhausted without meeting the goal.
struct Unsolvable {
  std::size_t expanded = 0;
};

struct BudgetExhausted {
  std::size_t expanded = 0;
  std::chrono::milliseconds wall{0};
};

using SolveResult = std::variant<Plan, Unsolvable, BudgetExhausted>;

/// A* on g + h_add, the additive delete-relaxation heuristic, reopening
/// states reached more cheaply. h_add is inadmissible, so plans are short but
/// not guaranteed optimal. Ties are broken by h, the id of the action that
/// generated the node, then insertion order, so identical inputs give identical plans.
SolveResult solve(const pddl::GroundTask& task, const SearchBudget& budget = {});
/// Grounds and solves. Throws pddl::GroundingError above the grounding cap.
SolveResult solve(const pddl::Domain& domain, const pddl::Problem& problem,
                  const SearchBudget& budget = {},
                  const pddl::GroundingOptions& grounding = {});

/// Additive heuristic value of `s`; nullopt when the goal is relaxed-unreachable.
std::optional<std::size_t> additive_heuristic(const pddl::GroundTask& task, const pddl::State& s);

struct OptimalPlan {
  std::vector<pddl::ActionId> steps;
  std::size_t explored = 0;
};

struct NoneWithinDepth {
  std::size_t explored = 0;
  /// True when every reachable state was visited (the goal is unreachable).
  bool exhausted = false;
};

using OracleResult = std::variant<OptimalPlan, NoneWithinDepth>;

class NodeCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Breadth-first search over the full state space: a shortest plan under
/// unit action cost. Throws NodeCapExceeded past `node_cap` stored states.
OracleResult bfs_oracle(const pddl::GroundTask& task, std::size_t depth_cap,
                        std::size_t node_cap = 1'000'000);

std::string describe(const SolveResult& result);

// --- External solver adapter ------------------------------------------------

/// The solver is run as `executable args...`, where the tokens `{domain}`,
/// `{problem}` and `{plan}` in `args` are replaced by file paths. Exit status 0
/// means a plan was written to `{plan}`, one parenthesized ground action per
/// line; lines starting with ';' are ignored. Any other status is a failure.
struct ExternalSolverConfig {
  std::filesystem::path executable;
  std::vector<std::string> args{"{domain}", "{problem}", "{plan}"};
  std::chrono::milliseconds timeout{10'000};
  /// Directory for the temporary files; the system temp dir when empty.
  std::filesystem::path work_dir;
};

struct SolverFailure {
  enum class Kind { launch, nonzero_exit, timeout, unparseable_plan, invalid_plan };
  Kind kind = Kind::launch;
  std::string detail;
  int exit_code = 0;
  std::optional<pddl::ValidationReport> report;
};

std::string_view to_string(SolverFailure::Kind kind);

using ExternalResult = std::variant<Plan, SolverFailure>;

ExternalResult external_solve(const pddl::Domain& domain, const pddl::Problem& problem,
                              const ExternalSolverConfig& config);

class PlanFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the one-action-per-line plan format against `task`.
std::vector<pddl::ActionId> parse_plan_text(const pddl::GroundTask& task, std::string_view text);

}  // namespace hmap::planner
