#include "hmap/eval/suite.hpp"

#include <algorithm>
#include <set>
#include <variant>

#include "hmap/pddl/parser.hpp"
#include "hmap/planner/planner.hpp"
#include "hmap/util/jsonl.hpp"

namespace hmap::eval {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::compound: return "compound";
    case Category::complex: return "complex";
    case Category::vague: return "vague";
  }
  return "?";
}

Category category_from_string(std::string_view s) {
  for (Category c : {Category::compound, Category::complex, Category::vague}) {
    if (to_string(c) == s) return c;
  }
  throw SuiteError("unknown category '" + std::string(s) + "'");
}

pddl::GroundTask capable_task(const hierarchy::Environment& env) {
  pddl::GroundTask t = env.task;
  std::erase_if(t.actions, [&](const pddl::GroundAction& a) {
    return !a.robot.empty() && !env.team.can(a.robot, a.schema);
  });
  t.by_name.clear();
  for (std::size_t i = 0; i < t.actions.size(); ++i) t.by_name[t.actions[i].name()] = i;
  return t;
}

multirobot::PartialOrderPlan deorder(const pddl::GroundTask& task, std::span<const pddl::ActionId> plan) {
  std::vector<multirobot::SubPlan> steps;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& a = task.actions.at(plan[i]);
    steps.push_back({i, a.robot, {multirobot::PlanStep::from(task, a)}});
  }
  return multirobot::merge_subplans(steps, plan.size(), {});
}

GroundTruth ground_truth(const hierarchy::Environment& env) {
  const auto task = capable_task(env);
  planner::OracleResult r;
  try {
    r = planner::bfs_oracle(task, kOracleDepth, kOracleNodes);
  } catch (const planner::NodeCapExceeded& e) {
    throw SuiteError(std::string("ground truth: ") + e.what());
  }
  const auto* p = std::get_if<planner::OptimalPlan>(&r);
  if (!p) throw SuiteError("ground truth: the goal is unreachable for the team");
  GroundTruth gt;
  for (const auto id : p->steps) gt.plan.push_back(task.actions[id].name());
  gt.actions = p->steps.size();
  gt.makespan = multirobot::makespan(deorder(task, p->steps));
  return gt;
}

TaskCase load_task(const std::filesystem::path& path) {
  const std::string where = path.string() + ": ";
  try {
    if (!std::filesystem::exists(path)) throw SuiteError("file not found");
    const auto j = nlohmann::json::parse(util::read_file(path));
    TaskCase t;
    t.id = j.at("id").get<std::string>();
    t.category = category_from_string(j.at("category").get<std::string>());
    t.instruction = j.at("instruction").get<std::string>();
    t.source = path;
    t.env = hierarchy::Environment::load(path.parent_path() / j.at("environment").get<std::string>());
    if (j.contains("goal")) {
      std::string lits;
      for (const auto& g : j.at("goal")) lits += " " + g.get<std::string>();
      const auto parsed = pddl::parse_problem("(define (problem goal) (:domain " + t.env.domain.name +
                                              ") (:goal (and" + lits + ")))");
      pddl::Problem p = t.env.problem;
      p.goal = parsed.goal;
      t.env = hierarchy::Environment::make(t.env.name, t.env.domain, p, t.env.team);
    }
    if (t.env.problem.goal.empty()) throw SuiteError("empty goal");
    for (const auto& l : t.env.problem.goal) t.goal.push_back(l.str());
    const auto gt = ground_truth(t.env);
    t.gt_plan = gt.plan;
    t.gt_actions = gt.actions;
    t.gt_makespan = gt.makespan;
    return t;
  } catch (const std::exception& e) {
    throw SuiteError(where + e.what());
  }
}

std::vector<TaskCase> load_suite(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw SuiteError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw SuiteError(dir.string() + ": no task files");
  std::vector<TaskCase> out;
  std::set<std::string> ids;
  for (const auto& f : files) {
    out.push_back(load_task(f));
    if (!ids.insert(out.back().id).second) throw SuiteError(f.string() + ": duplicate id '" + out.back().id + "'");
  }
  return out;
}

}  // namespace hmap::eval
