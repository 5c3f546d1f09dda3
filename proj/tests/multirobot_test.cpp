#include <doctest.h>

#include <functional>
#include <numeric>
#include <ranges>
#include <random>

#include "hmap/multirobot/pop.hpp"
#include "hmap/multirobot/team.hpp"
#include "hmap/pddl/parser.hpp"
#include "test_support.hpp"

using namespace hmap::multirobot;
using namespace hmap::pddl;
using hmap::testing::read_data;

namespace {

GroundTask mini_fridge() {
  const Domain d = parse_domain(read_data("pddl/household.pddl"));
  return ground(d, parse_problem(read_data("pddl/mini-fridge.pddl"), d));
}

PlanStep step(const GroundTask& t, const std::string& name) {
  const auto id = t.find_action(name);
  REQUIRE_MESSAGE(id.has_value(), name);
  return PlanStep::from(t, t.actions[*id]);
}

PlanStep synthetic(const std::string& robot, const std::string& atom) {
  return PlanStep{robot, "(touch " + robot + " " + atom + ")", {}, {"(" + atom + ")"}, {}};
}

// Every ordering of 0..n-1 consistent with `edges`, by depth-first search.
void linear_extensions(std::size_t n, const std::vector<Edge>& edges,
                       const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> order;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&] {
    if (order.size() == n) {
      visit(order);
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      bool ready = true;
      for (const auto& [a, b] : edges) ready = ready && !(b == i && !used[a]);
      if (!ready) continue;
      used[i] = true;
      order.push_back(i);
      rec();
      order.pop_back();
      used[i] = false;
    }
  };
  rec();
}

// Fewest unit time steps that run every node after all its predecessors.
std::size_t brute_force_schedule(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<unsigned> preds(n, 0);
  for (const auto& [a, b] : edges) preds[b] |= 1u << a;
  const unsigned full = (1u << n) - 1;
  std::vector<int> dist(full + 1, -1);
  std::vector<unsigned> frontier{0};
  dist[0] = 0;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const unsigned done = frontier[head];
    if (done == full) return static_cast<std::size_t>(dist[done]);
    unsigned avail = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(done >> i & 1u) && (preds[i] & done) == preds[i]) avail |= 1u << i;
    }
    for (unsigned sub = avail; sub; sub = (sub - 1) & avail) {
      const unsigned next = done | sub;
      if (dist[next] < 0) {
        dist[next] = dist[done] + 1;
        frontier.push_back(next);
      }
    }
  }
  return 0;
}

PartialOrderPlan dag(std::size_t n, std::vector<Edge> edges) {
  PartialOrderPlan p;
  for (std::size_t i = 0; i < n; ++i) {
    p.actions.push_back(synthetic("r", "a" + std::to_string(i)));
    p.chain_index.push_back(i);
  }
  std::sort(edges.begin(), edges.end());
  p.edges = std::move(edges);
  return p;
}

}  // namespace

TEST_CASE("robot team") {
  const auto team = RobotTeam::from_json(nlohmann::json::parse(R"({
    "robots": [{"id": "robot0", "type": "manipulator"}, {"id": "robot1", "type": "manipulator"},
               {"id": "robot2", "type": "mobile-base"}],
    "capabilities": {"manipulator": ["pickup", "put", "open"], "mobile-base": ["move", "toggle-off"]}
  })"));
  CHECK(team.robot_count() == 3);
  CHECK(team.type_count() == 2);
  CHECK(team.robots_of("manipulator") == std::vector<std::string>{"robot0", "robot1"});
  CHECK(team.can("robot2", "toggle-off"));
  CHECK_FALSE(team.can("robot2", "pickup"));
  CHECK(RobotTeam::from_json(team.to_json()).to_json() == team.to_json());

  RobotTeam bad = team;
  bad.cap["mobile-base"].clear();
  CHECK_THROWS_AS(bad.validate(), TeamError);
  bad = team;
  bad.type_of.erase("robot1");
  CHECK_THROWS_AS(bad.validate(), TeamError);
  bad = team;
  bad.cap["manipulator"].insert("fly");
  CHECK_THROWS_AS(bad.validate(), TeamError);

  MultiRobotProblem mrp{team, mini_fridge()};
  for (auto a : mrp.actions_of("robot0")) {
    CHECK(mrp.task.actions[a].robot == "robot0");
    CHECK(team.can("robot0", mrp.task.actions[a].schema));
  }
  CHECK(mrp.actions_of("robot2").empty());
}

TEST_CASE("merge_subplans examples") {
  SUBCASE("disjoint chains get no cross edges") {
    std::vector<SubPlan> subs{
        {0, "a", {synthetic("a", "p1"), synthetic("a", "p2"), synthetic("a", "p3")}},
        {1, "b", {synthetic("b", "q1"), synthetic("b", "q2")}}};
    const auto p = merge_subplans(subs, 2, {});
    CHECK(p.edges == std::vector<Edge>{{0, 1}, {1, 2}, {3, 4}});
    CHECK(makespan(p) == 3);
  }
  SUBCASE("fully ordered chain") {
    std::vector<SubPlan> subs{{0, "a", {}}};
    for (int i = 0; i < 5; ++i) subs[0].steps.push_back(synthetic("a", "p" + std::to_string(i)));
    CHECK(makespan(merge_subplans(subs, 1, {})) == 5);
  }
  SUBCASE("open before put") {
    const GroundTask t = mini_fridge();
    std::vector<SubPlan> subs{
        {0, "robot0",
         {step(t, "(pickup robot0 tomato counter)"), step(t, "(move robot0 counter fridge)"),
          step(t, "(put robot0 tomato fridge)")}},
        {1, "robot1",
         {step(t, "(move robot1 counter fridge)"), step(t, "(open robot1 fridge)"),
          step(t, "(egress robot1 fridge doorway)")}}};
    const std::vector<Edge> deps{{1, 0}};
    const auto p = merge_subplans(subs, 2, deps);
    // Subtask 1 comes first, so robot1's actions are 0..2 and robot0's 3..5.
    CHECK(p.actions[1].name == "(open robot1 fridge)");
    CHECK(p.actions[5].name == "(put robot0 tomato fridge)");
    CHECK(p.has_edge(1, 5));
    const auto names = p.canonical_names();
    const auto pos = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) - names.begin(); };
    CHECK(pos("(open robot1 fridge)") < pos("(put robot0 tomato fridge)"));
    const std::vector<Literal> goal(t.problem.goal);
    CHECK(validate_order(t, t.init, p, p.canonical_order(), goal).valid);
  }
  SUBCASE("cyclic dependencies") {
    const std::vector<Edge> deps{{0, 1}, {1, 0}};
    CHECK_THROWS_AS(merge_subplans(std::vector<SubPlan>{}, 2, deps), CycleError);
  }
  SUBCASE("json round trip") {
    std::vector<SubPlan> subs{{0, "a", {synthetic("a", "p"), synthetic("a", "q")}}, {1, "b", {synthetic("b", "p")}}};
    const auto p = merge_subplans(subs, 2, {});
    const auto q = PartialOrderPlan::from_json(p.to_json());
    CHECK(q.actions == p.actions);
    CHECK(q.edges == p.edges);
    CHECK(q.chain_index == p.chain_index);
  }
}

TEST_CASE("every linear extension of a merged plan validates") {
  const GroundTask t = mini_fridge();
  std::mt19937_64 rng(5);
  std::size_t checked_extensions = 0;
  int instances = 0;
  while (instances < 200) {
    // A random joint execution split into single-robot segments; each segment
    // is a subtask depending on the previous one.
    const std::size_t len = 2 + rng() % 7;
    State s = t.init;
    std::vector<SubPlan> subs;
    for (std::size_t k = 0; k < len; ++k) {
      const std::string robot = (rng() % 2) ? "robot0" : "robot1";
      std::vector<ActionId> ok;
      for (ActionId a = 0; a < t.actions.size(); ++a) {
        if (t.actions[a].robot == robot && applicable(s, t.actions[a])) ok.push_back(a);
      }
      if (ok.empty()) break;
      const auto& a = t.actions[ok[rng() % ok.size()]];
      s = apply(t, s, a);
      if (subs.empty() || subs.back().robot != robot || rng() % 3 == 0) {
        subs.push_back({subs.size(), robot, {}});
      }
      subs.back().steps.push_back(PlanStep::from(t, a));
    }
    if (subs.empty()) continue;
    std::vector<Edge> deps;
    for (std::size_t i = 1; i < subs.size(); ++i) deps.emplace_back(i - 1, i);
    // Reach whatever state the joint execution reached.
    std::vector<Literal> goal;
    for (AtomId id : s.ids()) goal.push_back(Literal{t.atoms.atom(id), true});
    const auto p = merge_subplans(subs, subs.size(), deps);
    REQUIRE(p.size() <= 8);
    linear_extensions(p.size(), p.edges, [&](const std::vector<std::size_t>& order) {
      ++checked_extensions;
      REQUIRE(validate_order(t, t.init, p, order, goal).valid);
    });
    REQUIRE(makespan(p) <= p.size());
    ++instances;
  }
  CHECK(checked_extensions > 1000);
  MESSAGE("linear extensions checked: " << checked_extensions);
}

TEST_CASE("makespan equals the brute-force minimal schedule on random DAGs") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<Edge> edges;
    std::bernoulli_distribution coin(0.1 + 0.05 * (trial % 8));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (coin(rng)) edges.emplace_back(a, b);
      }
    }
    // Relabel so edges do not always point from low to high ids.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& [a, b] : edges) {
      a = perm[a];
      b = perm[b];
    }
    const auto p = dag(n, edges);
    const std::size_t ms = makespan(p);
    REQUIRE(ms == brute_force_schedule(n, edges));
    REQUIRE(ms <= n);

    // Equality with |Δ| exactly when every pair is comparable.
    std::vector<unsigned> reach(n, 0);
    const auto topo = p.canonical_order();
    for (auto i : topo | std::views::reverse) {
      for (const auto& [a, b] : edges) if (a == i) reach[i] |= (1u << b) | reach[b];
    }
    bool total = true;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) total = total && ((reach[a] >> b & 1u) || (reach[b] >> a & 1u));
    REQUIRE((ms == n) == total);

    if (!edges.empty()) {
      auto fewer = edges;
      fewer.erase(fewer.begin() + static_cast<long>(rng() % fewer.size()));
      REQUIRE(makespan(dag(n, fewer)) <= ms);
    }
  }
}
