#include "hmap/multirobot/pop.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <tuple>

namespace hmap::multirobot {

namespace {

std::vector<std::string> atom_strs(const pddl::GroundTask& task, const std::vector<pddl::AtomId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(task.atom_str(id));
  std::sort(out.begin(), out.end());
  return out;
}

bool intersects(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

std::vector<std::string> touched(const PlanStep& s) {
  std::vector<std::string> out = s.pre;
  out.insert(out.end(), s.add.begin(), s.add.end());
  out.insert(out.end(), s.del.begin(), s.del.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> successors(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& [a, b] : edges) succ.at(a).push_back(b);
  return succ;
}

}  // namespace

PlanStep PlanStep::from(const pddl::GroundTask& task, const pddl::GroundAction& action) {
  PlanStep s;
  s.robot = action.robot;
  s.name = action.name();
  s.pre = atom_strs(task, action.pre_pos);
  const auto neg = atom_strs(task, action.pre_neg);
  s.pre.insert(s.pre.end(), neg.begin(), neg.end());
  std::sort(s.pre.begin(), s.pre.end());
  s.add = atom_strs(task, action.add);
  s.del = atom_strs(task, action.del);
  return s;
}

std::vector<std::size_t> subtask_order(std::size_t n, std::span<const Edge> deps) {
  std::vector<std::size_t> indeg(n, 0);
  const auto succ = successors(n, deps);
  for (const auto& [a, b] : deps) ++indeg.at(b);
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (auto j : succ[i]) {
      if (--indeg[j] == 0) ready.push(j);
    }
  }
  if (order.size() != n) throw CycleError("subtask dependencies contain a cycle");
  return order;
}

bool conflicts(const PlanStep& a, const PlanStep& b) {
  const auto ta = touched(a);
  const auto tb = touched(b);
  return intersects(a.add, tb) || intersects(a.del, tb) || intersects(b.add, ta) || intersects(b.del, ta);
}

PartialOrderPlan merge_subplans(std::span<const SubPlan> subplans, std::size_t n_subtasks,
                                std::span<const Edge> deps) {
  const auto order = subtask_order(n_subtasks, deps);
  std::vector<std::size_t> rank(n_subtasks);
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

  std::vector<std::size_t> by_rank(subplans.size());
  for (std::size_t i = 0; i < by_rank.size(); ++i) by_rank[i] = i;
  std::stable_sort(by_rank.begin(), by_rank.end(), [&](std::size_t a, std::size_t b) {
    return rank.at(subplans[a].subtask) < rank.at(subplans[b].subtask);
  });

  PartialOrderPlan plan;
  std::vector<std::size_t> owner;  // subplan rank of each action
  std::map<std::string, std::size_t> last_of_robot;
  std::map<std::string, std::size_t> chain_len;
  std::set<Edge> edges;
  for (std::size_t r = 0; r < by_rank.size(); ++r) {
    const SubPlan& sp = subplans[by_rank[r]];
    for (const auto& step : sp.steps) {
      const std::size_t id = plan.actions.size();
      plan.actions.push_back(step);
      plan.actions.back().robot = sp.robot;
      plan.chain_index.push_back(chain_len[sp.robot]++);
      owner.push_back(r);
      if (auto it = last_of_robot.find(sp.robot); it != last_of_robot.end()) edges.insert({it->second, id});
      last_of_robot[sp.robot] = id;
    }
  }
  // Actions are numbered in subtask order, so orienting every conflict from the
  // lower id to the higher one follows the dependency order.
  for (std::size_t a = 0; a < plan.actions.size(); ++a) {
    for (std::size_t b = a + 1; b < plan.actions.size(); ++b) {
      if (owner[a] == owner[b] || plan.actions[a].robot == plan.actions[b].robot) continue;
      if (conflicts(plan.actions[a], plan.actions[b])) edges.insert({a, b});
    }
  }
  plan.edges.assign(edges.begin(), edges.end());
  return plan;
}

std::vector<std::size_t> PartialOrderPlan::canonical_order() const {
  const std::size_t n = actions.size();
  std::vector<std::size_t> indeg(n, 0);
  const auto succ = successors(n, edges);
  for (const auto& [a, b] : edges) ++indeg.at(b);
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  auto push = [&](std::size_t i) { ready.emplace(actions[i].robot, chain_index.empty() ? i : chain_index[i], i); };
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = std::get<2>(ready.top());
    ready.pop();
    order.push_back(i);
    for (auto j : succ[i]) {
      if (--indeg[j] == 0) push(j);
    }
  }
  if (order.size() != n) throw CycleError("partial order contains a cycle");
  return order;
}

std::vector<std::string> PartialOrderPlan::canonical_names() const {
  std::vector<std::string> out;
  for (auto i : canonical_order()) out.push_back(actions[i].name);
  return out;
}

bool PartialOrderPlan::has_edge(std::size_t before, std::size_t after) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{before, after});
}

nlohmann::json PartialOrderPlan::to_json() const {
  nlohmann::json acts = nlohmann::json::array();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    acts.push_back({{"id", i},
                    {"robot", a.robot},
                    {"action", a.name},
                    {"chain_index", chain_index.empty() ? i : chain_index[i]},
                    {"pre", a.pre},
                    {"add", a.add},
                    {"del", a.del}});
  }
  nlohmann::json es = nlohmann::json::array();
  for (const auto& [a, b] : edges) es.push_back({a, b});
  return {{"actions", acts}, {"edges", es}};
}

PartialOrderPlan PartialOrderPlan::from_json(const nlohmann::json& j) {
  PartialOrderPlan p;
  for (const auto& a : j.at("actions")) {
    p.actions.push_back({a.at("robot"), a.at("action"), a.at("pre"), a.at("add"), a.at("del")});
    p.chain_index.push_back(a.at("chain_index"));
  }
  for (const auto& e : j.at("edges")) p.edges.emplace_back(e.at(0), e.at(1));
  std::sort(p.edges.begin(), p.edges.end());
  return p;
}

std::size_t makespan(const PartialOrderPlan& plan) {
  const auto order = plan.canonical_order();
  const auto succ = successors(plan.size(), plan.edges);
  std::vector<std::size_t> depth(plan.size(), 1);
  std::size_t best = 0;
  for (auto i : order) {
    best = std::max(best, depth[i]);
    for (auto j : succ[i]) depth[j] = std::max(depth[j], depth[i] + 1);
  }
  return best;
}

pddl::ValidationReport validate_order(const pddl::GroundTask& env, const pddl::State& from,
                                      const PartialOrderPlan& plan, std::span<const std::size_t> order,
                                      std::span<const pddl::Literal> goal) {
  std::vector<std::string> names;
  for (auto i : order) names.push_back(plan.actions.at(i).name);
  return pddl::validate_plan(env, from, names, goal);
}

}  // namespace hmap::multirobot
