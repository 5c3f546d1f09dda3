#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmap/pddl/task.hpp"

namespace hmap::multirobot {

class TeamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Robots, their types, and the skills (action schema names) each type has.
struct RobotTeam {
  std::vector<std::string> robots;
  std::map<std::string, std::string> type_of;
  std::map<std::string, std::set<std::string>> cap;
  std::set<std::string> skills;

  std::size_t robot_count() const { return robots.size(); }
  std::size_t type_count() const { return types().size(); }
  /// Types in use, sorted.
  std::vector<std::string> types() const;
  std::vector<std::string> robots_of(const std::string& type) const;
  bool can(const std::string& robot, const std::string& skill) const;

  /// Throws TeamError on a robot without a type, a used type without skills,
  /// or a skill outside the global skill set.
  void validate() const;

  nlohmann::json to_json() const;
  static RobotTeam from_json(const nlohmann::json& j);
};

/// A grounded environment plus the team acting in it.
struct MultiRobotProblem {
  RobotTeam team;
  pddl::GroundTask task;

  /// Ground actions tagged with `robot` whose schema is within its capability.
  std::vector<pddl::ActionId> actions_of(const std::string& robot) const;
};

}  // namespace hmap::multirobot
