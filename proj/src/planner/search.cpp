#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "hmap/planner/planner.hpp"

namespace hmap::planner {

using pddl::ActionId;
using pddl::AtomId;
using pddl::GroundTask;
using pddl::State;

namespace {

constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

/// Delete-relaxed cost propagation (h_add), reusable across states of one task.
class AdditiveHeuristic {
 public:
  explicit AdditiveHeuristic(const GroundTask& task) : task_(task), consumers_(task.atoms.size()) {
    for (ActionId a = 0; a < task.actions.size(); ++a) {
      for (AtomId p : task.actions[a].pre_pos) consumers_[p].push_back(a);
      if (task.actions[a].pre_pos.empty()) free_actions_.push_back(a);
    }
  }

  std::optional<std::size_t> operator()(const State& s) {
    cost_.assign(task_.atoms.size(), kInf);
    remaining_.resize(task_.actions.size());
    accum_.assign(task_.actions.size(), 0);
    for (ActionId a = 0; a < task_.actions.size(); ++a) remaining_[a] = task_.actions[a].pre_pos.size();

    using Item = std::pair<std::size_t, AtomId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (AtomId id : s.ids()) {
      cost_[id] = 0;
      queue.emplace(0, id);
    }
    for (ActionId a : free_actions_) fire(a, queue);

    while (!queue.empty()) {
      auto [c, atom] = queue.top();
      queue.pop();
      if (c > cost_[atom]) continue;
      for (ActionId a : consumers_[atom]) {
        accum_[a] += c;
        if (--remaining_[a] == 0) fire(a, queue);
      }
    }

    std::size_t h = 0;
    for (AtomId g : task_.goal_pos) {
      if (cost_[g] == kInf) return std::nullopt;
      h += cost_[g];
    }
    return h;
  }

 private:
  template <typename Queue>
  void fire(ActionId a, Queue& queue) {
    const std::size_t c = accum_[a] + 1;
    for (AtomId q : task_.actions[a].add) {
      if (c < cost_[q]) {
        cost_[q] = c;
        queue.emplace(c, q);
      }
    }
  }

  const GroundTask& task_;
  std::vector<std::vector<ActionId>> consumers_;
  std::vector<ActionId> free_actions_;
  std::vector<std::size_t> cost_;
  std::vector<std::size_t> remaining_;
  std::vector<std::size_t> accum_;
};

struct Node {
  State state;
  std::size_t parent;
  ActionId via;
};

std::vector<ActionId> extract(const std::vector<Node>& nodes, std::size_t idx) {
  std::vector<ActionId> steps;
  while (nodes[idx].parent != kInf) {
    steps.push_back(nodes[idx].via);
    idx = nodes[idx].parent;
  }
  return {steps.rbegin(), steps.rend()};
}

}  // namespace

std::optional<std::size_t> additive_heuristic(const GroundTask& task, const State& s) {
  AdditiveHeuristic h(task);
  return h(s);
}

SolveResult solve(const GroundTask& task, const SearchBudget& budget) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start); };

  AdditiveHeuristic heuristic(task);
  std::vector<Node> nodes;
  std::vector<std::size_t> g;
  std::unordered_map<State, std::size_t, pddl::StateHash> seen;

  // (g + h, h, generating action, insertion order, node, g at push time)
  struct Entry {
    std::size_t f;
    std::size_t h;
    std::size_t action;
    std::size_t seq;
    std::size_t node;
    std::size_t g;
    bool operator>(const Entry& o) const {
      return std::tie(f, h, action, seq) > std::tie(o.f, o.h, o.action, o.seq);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const auto h0 = heuristic(task.init);
  if (!h0) return Unsolvable{0};
  nodes.push_back({task.init, kInf, 0});
  g.push_back(0);
  seen.emplace(task.init, 0);
  std::vector<std::optional<std::size_t>> hs{h0};
  std::size_t seq = 0;
  open.push({*h0, *h0, 0, seq++, 0, 0});

  std::size_t expanded = 0;
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (e.g != g[e.node]) continue;  // superseded by a cheaper path
    const State current = nodes[e.node].state;
    if (task.satisfies_goal(current)) return Plan{extract(nodes, e.node), expanded};

    if (expanded >= budget.max_expansions) return BudgetExhausted{expanded, elapsed()};
    if ((expanded & 63) == 0 && elapsed() > budget.max_wall) return BudgetExhausted{expanded, elapsed()};
    ++expanded;

    const std::size_t g_next = e.g + 1;
    for (ActionId a = 0; a < task.actions.size(); ++a) {
      const auto& act = task.actions[a];
      if (!pddl::applicable(current, act)) continue;
      State next = current.with(act.add, act.del);
      std::size_t idx;
      if (const auto it = seen.find(next); it != seen.end()) {
        idx = it->second;
        if (g[idx] <= g_next) continue;
        nodes[idx].parent = e.node;
        nodes[idx].via = a;
        g[idx] = g_next;
      } else {
        idx = nodes.size();
        seen.emplace(next, idx);
        nodes.push_back({std::move(next), e.node, a});
        g.push_back(g_next);
        hs.push_back(heuristic(nodes[idx].state));
      }
      if (!hs[idx]) continue;  // relaxed-unreachable: dead end
      open.push({g_next + *hs[idx], *hs[idx], a, seq++, idx, g_next});
    }
  }
  return Unsolvable{expanded};
}

SolveResult solve(const pddl::Domain& domain, const pddl::Problem& problem, const SearchBudget& budget,
                  const pddl::GroundingOptions& grounding) {
  const GroundTask task = pddl::ground(domain, problem, grounding);
  return solve(task, budget);
}

OracleResult bfs_oracle(const GroundTask& task, std::size_t depth_cap, std::size_t node_cap) {
  std::vector<Node> nodes;
  std::vector<std::size_t> depth;
  std::unordered_map<State, std::size_t, pddl::StateHash> seen;
  nodes.push_back({task.init, kInf, 0});
  depth.push_back(0);
  seen.emplace(task.init, 0);
  if (task.satisfies_goal(task.init)) return OptimalPlan{{}, 1};

  bool cut = false;
  for (std::size_t head = 0; head < nodes.size(); ++head) {
    if (depth[head] >= depth_cap) {
      cut = true;
      continue;
    }
    const State current = nodes[head].state;
    for (ActionId a = 0; a < task.actions.size(); ++a) {
      const auto& act = task.actions[a];
      if (!pddl::applicable(current, act)) continue;
      State next = current.with(act.add, act.del);
      if (seen.contains(next)) continue;
      if (nodes.size() >= node_cap) {
        throw NodeCapExceeded("bfs_oracle: more than " + std::to_string(node_cap) + " states");
      }
      const std::size_t idx = nodes.size();
      seen.emplace(next, idx);
      const bool goal = task.satisfies_goal(next);
      nodes.push_back({std::move(next), head, a});
      depth.push_back(depth[head] + 1);
      if (goal) return OptimalPlan{extract(nodes, idx), nodes.size()};
    }
  }
  return NoneWithinDepth{nodes.size(), !cut};
}

std::string describe(const SolveResult& result) {
  std::ostringstream out;
  if (const auto* p = std::get_if<Plan>(&result)) {
    out << "plan with " << p->steps.size() << " step(s) after " << p->expanded << " expansion(s)";
  } else if (const auto* u = std::get_if<Unsolvable>(&result)) {
    out << "unsolvable: reachable state space exhausted after " << u->expanded << " expansion(s)";
  } else {
    const auto& b = std::get<BudgetExhausted>(result);
    out << "search budget exhausted after " << b.expanded << " expansion(s) and " << b.wall.count()
        << " ms";
  }
  return out.str();
}

}  // namespace hmap::planner
