#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hmap/hierarchy/environment.hpp"
#include "hmap/multirobot/pop.hpp"

namespace hmap::eval {

class SuiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Category { compound, complex, vague };

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

/// One benchmark task. The environment's problem goal is G*; the ground
/// truth comes from a breadth-first search over it, never from the file.
struct TaskCase {
  std::string id;
  Category category = Category::compound;
  std::string instruction;
  std::filesystem::path source;
  hierarchy::Environment env;
  std::vector<std::string> goal;  // G*, as literals
  std::vector<std::string> gt_plan;
  std::size_t gt_actions = 0;
  std::size_t gt_makespan = 0;
};

/// Ground actions the team can perform; actions of robots lacking the skill
/// are dropped.
pddl::GroundTask capable_task(const hierarchy::Environment& env);

/// Partial order over a sequential plan: same-robot steps stay chained and
/// conflicting steps keep their relative order.
multirobot::PartialOrderPlan deorder(const pddl::GroundTask& task, std::span<const pddl::ActionId> plan);

struct GroundTruth {
  std::vector<std::string> plan;
  std::size_t actions = 0;
  std::size_t makespan = 0;
};

inline constexpr std::size_t kOracleDepth = 30;
inline constexpr std::size_t kOracleNodes = 2'000'000;

/// Shortest plan for the team and the makespan of its deordering. Throws
/// SuiteError when none exists within the oracle caps.
GroundTruth ground_truth(const hierarchy::Environment& env);

/// Task file: {"id", "category", "instruction", "environment": path,
/// "goal": [literal, ...]}. The goal replaces the environment problem's goal;
/// the path is relative to the file. Throws SuiteError naming the file.
TaskCase load_task(const std::filesystem::path& path);

/// Every *.json file of `dir`, in file name order. Ids must be unique.
std::vector<TaskCase> load_suite(const std::filesystem::path& dir);

}  // namespace hmap::eval
