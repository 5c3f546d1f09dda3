#include "hmap/hierarchy/environment.hpp"

#include "hmap/pddl/parser.hpp"
#include "hmap/util/jsonl.hpp"
#include "hmap/util/text.hpp"

namespace hmap::hierarchy {

Environment Environment::make(std::string name, pddl::Domain domain, pddl::Problem problem,
                              multirobot::RobotTeam team) {
  try {
    team.validate();
  } catch (const multirobot::TeamError& e) {
    throw EnvironmentError(e.what());
  }
  const auto objects = pddl::all_objects(domain, problem);
  for (const auto& r : team.robots) {
    const bool found = std::any_of(objects.begin(), objects.end(), [&](const pddl::TypedName& o) {
      return o.name == r && domain.is_subtype(o.type, "robot");
    });
    if (!found) throw EnvironmentError("robot '" + r + "' is not a robot object of problem '" + problem.name + "'");
  }
  for (const auto& s : team.skills) {
    if (!domain.find_action(s)) throw EnvironmentError("skill '" + s + "' is not an action of domain '" + domain.name + "'");
  }
  Environment env{std::move(name), std::move(domain), std::move(problem), std::move(team), {}};
  env.task = pddl::ground(env.domain, env.problem);
  return env;
}

namespace {

std::string read_existing(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw EnvironmentError(path.string() + ": file not found");
  return util::read_file(path);
}

}  // namespace

Environment Environment::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    const auto d = pddl::parse_domain(read_existing(base_dir / j.at("domain").get<std::string>()));
    const auto p = pddl::parse_problem(read_existing(base_dir / j.at("problem").get<std::string>()), d);
    return make(j.value("name", p.name), d, p, multirobot::RobotTeam::from_json(j.at("team")));
  } catch (const EnvironmentError&) {
    throw;
  } catch (const std::exception& e) {
    throw EnvironmentError(e.what());
  }
}

Environment Environment::load(const std::filesystem::path& path) {
  nlohmann::json j;
  const std::string text = read_existing(path);
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw EnvironmentError(path.string() + ": " + e.what());
  }
  try {
    return from_json(j, path.parent_path());
  } catch (const EnvironmentError& e) {
    throw EnvironmentError(path.string() + ": " + e.what());
  }
}

std::string Environment::describe() const {
  std::string out = "Environment: " + name + "\nRobots:\n";
  for (const auto& r : team.robots) {
    const auto& type = team.type_of.at(r);
    const auto& skills = team.cap.at(type);
    out += "  " + r + " (" + type + "): " + util::join({skills.begin(), skills.end()}, " ") + "\n";
  }
  out += "Objects:\n";
  for (const auto& o : pddl::all_objects(domain, problem)) out += "  " + o.name + " - " + o.type + "\n";
  out += "State:\n";
  for (const auto& a : task.describe(task.init)) out += "  " + a + "\n";
  out += "Domain:\n" + pddl::serialize(domain);
  return out;
}

}  // namespace hmap::hierarchy
