#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hmap/multirobot/team.hpp"
#include "hmap/pddl/task.hpp"

namespace hmap::hierarchy {

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The world the team acts in: a domain, a reference problem whose goal is
/// the joint goal G, and the team. Immutable once built.
struct Environment {
  std::string name;
  pddl::Domain domain;
  pddl::Problem problem;
  multirobot::RobotTeam team;
  pddl::GroundTask task;

  /// Checks that every robot is an object of the problem and every skill an
  /// action of the domain, then grounds.
  static Environment make(std::string name, pddl::Domain domain, pddl::Problem problem, multirobot::RobotTeam team);

  /// JSON: {"name", "domain": path, "problem": path, "team": {...}}; paths are
  /// relative to the file. Throws EnvironmentError.
  static Environment load(const std::filesystem::path& path);
  static Environment from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Text given to agents: robots and skills, typed objects, current state
  /// and the domain's action schemas.
  std::string describe() const;
};

}  // namespace hmap::hierarchy
