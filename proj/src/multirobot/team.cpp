#include "hmap/multirobot/team.hpp"

#include <algorithm>

namespace hmap::multirobot {

std::vector<std::string> RobotTeam::types() const {
  std::set<std::string> used;
  for (const auto& r : robots) {
    if (auto it = type_of.find(r); it != type_of.end()) used.insert(it->second);
  }
  return {used.begin(), used.end()};
}

std::vector<std::string> RobotTeam::robots_of(const std::string& type) const {
  std::vector<std::string> out;
  for (const auto& r : robots) {
    if (auto it = type_of.find(r); it != type_of.end() && it->second == type) out.push_back(r);
  }
  return out;
}

bool RobotTeam::can(const std::string& robot, const std::string& skill) const {
  const auto t = type_of.find(robot);
  if (t == type_of.end()) return false;
  const auto c = cap.find(t->second);
  return c != cap.end() && c->second.count(skill) > 0;
}

void RobotTeam::validate() const {
  if (robots.empty()) throw TeamError("team has no robots");
  std::set<std::string> seen;
  for (const auto& r : robots) {
    if (!seen.insert(r).second) throw TeamError("duplicate robot '" + r + "'");
    if (!type_of.count(r)) throw TeamError("robot '" + r + "' has no type");
  }
  for (const auto& t : types()) {
    const auto c = cap.find(t);
    if (c == cap.end() || c->second.empty()) throw TeamError("robot type '" + t + "' has no skills");
    for (const auto& s : c->second) {
      if (!skills.count(s)) throw TeamError("skill '" + s + "' of type '" + t + "' is not a known skill");
    }
  }
}

nlohmann::json RobotTeam::to_json() const {
  nlohmann::json robots_j = nlohmann::json::array();
  for (const auto& r : robots) robots_j.push_back({{"id", r}, {"type", type_of.at(r)}});
  nlohmann::json cap_j = nlohmann::json::object();
  for (const auto& [t, s] : cap) cap_j[t] = std::vector<std::string>(s.begin(), s.end());
  return {{"robots", robots_j}, {"capabilities", cap_j},
          {"skills", std::vector<std::string>(skills.begin(), skills.end())}};
}

RobotTeam RobotTeam::from_json(const nlohmann::json& j) {
  RobotTeam team;
  for (const auto& r : j.at("robots")) {
    const std::string id = r.at("id");
    team.robots.push_back(id);
    team.type_of[id] = r.at("type");
  }
  for (const auto& [t, s] : j.at("capabilities").items()) {
    team.cap[t] = s.get<std::set<std::string>>();
  }
  if (j.contains("skills")) {
    team.skills = j.at("skills").get<std::set<std::string>>();
  } else {
    for (const auto& [t, s] : team.cap) team.skills.insert(s.begin(), s.end());
  }
  team.validate();
  return team;
}

std::vector<pddl::ActionId> MultiRobotProblem::actions_of(const std::string& robot) const {
  std::vector<pddl::ActionId> out;
  for (pddl::ActionId a = 0; a < task.actions.size(); ++a) {
    const auto& ga = task.actions[a];
    if (ga.robot == robot && team.can(robot, ga.schema)) out.push_back(a);
  }
  return out;
}

}  // namespace hmap::multirobot
