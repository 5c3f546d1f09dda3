// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "../test_support.hpp"
#include "hmap/cli/commands.hpp"
#include "hmap/eval/harness.hpp"
#include "hmap/eval/suite.hpp"
#include "hmap/hierarchy/orchestrate.hpp"
#include "hmap/llm/cassette.hpp"
#include "hmap/multirobot/pop.hpp"
#include "hmap/pddl/parser.hpp"
#include "hmap/pddl/validate.hpp"
#include "hmap/planner/planner.hpp"
#include "hmap/util/jsonl.hpp"

using namespace hmap;
using nlohmann::json;

namespace {

constexpr double kRoundTripSeconds = 1.0;
constexpr double kTransitionSeconds = 30.0;
constexpr double kPlannerSeconds = 60.0;
constexpr double kPartialOrderSeconds = 60.0;
constexpr int kTransitionPairs = 10'000;
constexpr std::size_t kPlannerMargin = 0;
constexpr std::size_t kExtensionCap = 8;
constexpr int kRandomDags = 100;
constexpr int kKMax = 5;
constexpr double kMetricTolerance = 1e-12;

constexpr const char* kCaseStudy = "Put the tomato in the fridge and turn off the room light.";
constexpr const char* kFailing = "Keep the tomato somewhere cold.";
constexpr const char* kSecondTask = "Put the tomato in the fridge, place the apple on the table, then turn off the room light.";

// Published prompt updates of the case study, verbatim.
constexpr const char* kInitialPrompt = "Decompose into subtasks as needed and assign them to robots. Hint: \"\"";
constexpr const char* kHint1 = "before putting the tomato into the fridge, it is necessary to open the fridge.";
constexpr const char* kMeta1 =
    "for any subtask that places into a receptacle with open/close affordance, insert Open before any Put.";
constexpr const char* kHint2 = "after opening the fridge, move to a non-blocking waypoint to clear the doorway.";
constexpr const char* kMeta2 = "append an egress action to a non-blocking waypoint to clear the doorway.";

class Failed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path data(const std::string& rel) { return testing::data_dir() / rel; }

std::string cassette(const std::string& name) { return data("cassettes/" + name + ".jsonl").string(); }

hierarchy::Outcome replay(const std::string& instruction, const std::string& env, const std::string& name,
                          hierarchy::Session& session) {
  llm::CassetteBackend backend(llm::Cassette::load(cassette(name)));
  return hierarchy::orchestrate(instruction, hierarchy::Environment::load(data("envs/" + env + ".json")), backend,
                                session);
}

// --- 1 -----------------------------------------------------------------------

std::string round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::filesystem::path> files;
  for (const char* dir : {"pddl", "envs"}) {
    for (const auto& e : std::filesystem::directory_iterator(data(dir))) {
      if (e.path().extension() == ".pddl") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, pddl::Domain> domains;
  std::vector<std::filesystem::path> problems;
  for (const auto& f : files) {
    const auto text = util::read_file(f);
    if (text.find("(domain ") == std::string::npos) {
      problems.push_back(f);
      continue;
    }
    const auto d = pddl::parse_domain(text);
    const auto again = pddl::parse_domain(pddl::serialize(d));
    expect(again == d, f.filename().string() + ": domain round trip differs");
    expect(pddl::serialize(again) == pddl::serialize(d), f.filename().string() + ": serialization not a fixed point");
    domains.emplace(d.name, d);
  }
  expect(domains.count("manipulation") == 1, "PickupObject domain missing from the corpus");
  for (const auto& f : problems) {
    const auto p0 = pddl::parse_problem(util::read_file(f));
    const auto it = domains.find(p0.domain_name);
    expect(it != domains.end(), f.filename().string() + ": no domain " + p0.domain_name);
    const auto p = pddl::parse_problem(util::read_file(f), it->second);
    const auto again = pddl::parse_problem(pddl::serialize(p), it->second);
    expect(again == p, f.filename().string() + ": problem round trip differs");
    expect(pddl::serialize(again) == pddl::serialize(p), f.filename().string() + ": serialization not a fixed point");
  }
  const double s = seconds_since(t0);
  expect(s < kRoundTripSeconds, "runtime " + std::to_string(s) + " s");
  return std::to_string(domains.size()) + " domains, " + std::to_string(problems.size()) + " problems";
}

// --- 2 -----------------------------------------------------------------------

std::set<std::string> ground_set(const pddl::Domain& d, const pddl::GroundAction& a, bool pre, bool positive) {
  const auto& schema = d.actions[a.schema_index];
  std::set<std::string> out;
  for (const auto& l : pre ? schema.pre : schema.eff) {
    if (l.positive != positive) continue;
    std::string s = "(" + l.atom.predicate;
    for (const auto& arg : l.atom.args) {
      std::string v = arg;
      for (std::size_t i = 0; i < schema.params.size(); ++i) {
        if (schema.params[i].name == arg) v = a.args[i];
      }
      s += " " + v;
    }
    out.insert(s + ")");
  }
  return out;
}

std::string transitions() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = pddl::parse_domain(util::read_file(data("pddl/household.pddl")));
  const auto t = pddl::ground(d, pddl::parse_problem(util::read_file(data("envs/kitchen.pddl")), d));
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> pick(0, t.actions.size() - 1);
  std::size_t applicable = 0;
  for (int i = 0; i < kTransitionPairs; ++i) {
    std::vector<pddl::AtomId> ids;
    for (pddl::AtomId a = 0; a < t.atoms.size(); ++a) {
      if (coin(rng)) ids.push_back(a);
    }
    const pddl::State s(ids);
    const auto& a = t.actions[pick(rng)];
    const auto sv = t.describe(s);
    const std::set<std::string> before(sv.begin(), sv.end());

    bool oracle = true;
    for (const auto& x : ground_set(d, a, true, true)) oracle = oracle && before.count(x);
    for (const auto& x : ground_set(d, a, true, false)) oracle = oracle && !before.count(x);
    expect(pddl::applicable(s, a) == oracle, "applicability disagrees on " + a.name());
    applicable += oracle;

    const auto nv = t.describe(s.with(a.add, a.del));
    const std::set<std::string> after(nv.begin(), nv.end());
    std::set<std::string> expected = before;
    for (const auto& x : ground_set(d, a, false, false)) expected.erase(x);
    const auto adds = ground_set(d, a, false, true);
    const auto dels = ground_set(d, a, false, false);
    for (const auto& x : adds) {
      if (!dels.count(x)) expected.insert(x);
    }
    expect(after == expected, "successor differs from (s + add) \\ del on " + a.name());
    for (const auto& x : before) {
      if (!adds.count(x) && !dels.count(x)) expect(after.count(x), "frame violated on " + x);
    }
  }
  expect(applicable > 0, "no applicable pair sampled");
  const double s = seconds_since(t0);
  expect(s < kTransitionSeconds, "runtime " + std::to_string(s) + " s");
  return std::to_string(kTransitionPairs) + " pairs, " + std::to_string(applicable) + " applicable, 0 violations";
}

// --- 3 -----------------------------------------------------------------------

std::string planner_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = eval::load_suite(data("suite"));
  expect(cases.size() == 12, "expected 12 bundled tasks");
  std::size_t worst = 0;
  for (const auto& c : cases) {
    const auto t = eval::capable_task(c.env);
    const auto r = planner::solve(t);
    expect(std::holds_alternative<planner::Plan>(r), c.id + ": " + planner::describe(r));
    const auto& plan = std::get<planner::Plan>(r).steps;
    expect(pddl::validate_plan(t, plan).valid, c.id + ": plan rejected by the validator");
    const auto o = planner::bfs_oracle(t, eval::kOracleDepth, eval::kOracleNodes);
    expect(std::holds_alternative<planner::OptimalPlan>(o), c.id + ": oracle found no plan");
    const auto opt = std::get<planner::OptimalPlan>(o).steps.size();
    expect(plan.size() >= opt, c.id + ": shorter than the optimum");
    const auto gap = plan.size() - opt;
    worst = std::max(worst, gap);
    expect(gap <= kPlannerMargin, c.id + ": gap " + std::to_string(gap));
  }
  const double s = seconds_since(t0);
  expect(s < kPlannerSeconds, "runtime " + std::to_string(s) + " s");
  return "12 tasks, max gap " + std::to_string(worst);
}

// --- 4 -----------------------------------------------------------------------

void extensions(std::size_t n, const std::vector<multirobot::Edge>& edges,
                const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> order;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&] {
    if (order.size() == n) return visit(order);
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

std::size_t brute_force_schedule(std::size_t n, const std::vector<multirobot::Edge>& edges) {
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
      if (dist[done | sub] < 0) {
        dist[done | sub] = dist[done] + 1;
        frontier.push_back(done | sub);
      }
    }
  }
  throw Failed("brute force found no schedule");
}

std::string partial_order() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = pddl::parse_domain(util::read_file(data("pddl/household.pddl")));
  const auto t = pddl::ground(d, pddl::parse_problem(util::read_file(data("pddl/mini-fridge.pddl")), d));
  std::mt19937_64 rng(11);
  std::size_t plans = 0;
  std::size_t orders = 0;
  while (plans < 200) {
    const std::size_t len = 2 + rng() % 7;
    pddl::State s = t.init;
    std::vector<multirobot::SubPlan> subs;
    for (std::size_t k = 0; k < len; ++k) {
      const std::string robot = rng() % 2 ? "robot0" : "robot1";
      std::vector<pddl::ActionId> ok;
      for (pddl::ActionId a = 0; a < t.actions.size(); ++a) {
        if (t.actions[a].robot == robot && pddl::applicable(s, t.actions[a])) ok.push_back(a);
      }
      if (ok.empty()) break;
      const auto& a = t.actions[ok[rng() % ok.size()]];
      s = pddl::apply(t, s, a);
      if (subs.empty() || subs.back().robot != robot || rng() % 3 == 0) subs.push_back({subs.size(), robot, {}});
      subs.back().steps.push_back(multirobot::PlanStep::from(t, a));
    }
    if (subs.empty()) continue;
    std::vector<multirobot::Edge> deps;
    for (std::size_t i = 1; i < subs.size(); ++i) deps.emplace_back(i - 1, i);
    std::vector<pddl::Literal> goal;
    for (auto id : s.ids()) goal.push_back(pddl::Literal{t.atoms.atom(id), true});
    const auto p = multirobot::merge_subplans(subs, subs.size(), deps);
    if (p.size() > kExtensionCap) continue;
    extensions(p.size(), p.edges, [&](const std::vector<std::size_t>& order) {
      ++orders;
      expect(multirobot::validate_order(t, t.init, p, order, goal).valid, "a linear extension fails validation");
    });
    ++plans;
  }

  for (int trial = 0; trial < kRandomDags; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::bernoulli_distribution coin(0.1 + 0.05 * (trial % 8));
    multirobot::PartialOrderPlan p;
    for (std::size_t i = 0; i < n; ++i) {
      p.actions.push_back({"r", "(a" + std::to_string(i) + ")", {}, {"(x" + std::to_string(i) + ")"}, {}});
      p.chain_index.push_back(i);
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (coin(rng)) p.edges.emplace_back(perm[a], perm[b]);
      }
    }
    std::sort(p.edges.begin(), p.edges.end());
    const auto ms = multirobot::makespan(p);
    expect(ms == brute_force_schedule(n, p.edges), "makespan differs from the brute-force schedule");
  }
  const double s = seconds_since(t0);
  expect(s < kPartialOrderSeconds, "runtime " + std::to_string(s) + " s");
  return std::to_string(plans) + " merged plans, " + std::to_string(orders) + " extensions, " +
         std::to_string(kRandomDags) + " DAGs";
}

// --- 5 -----------------------------------------------------------------------

std::string case_study() {
  hierarchy::Session session;
  const auto o = replay(kCaseStudy, "kitchen", "case_study", session);
  expect(o.success, "case study did not succeed");
  expect(o.iterations == 3, "succeeded after " + std::to_string(o.iterations) + " iterations");
  const auto f = o.state.trace.of_kind("failure");
  expect(f.size() == 2, std::to_string(f.size()) + " failures");
  const std::string first = f[0].at("prose");
  const std::string second = f[1].at("prose");
  expect(first.find("(put robot0 tomato fridge) cannot be executed: precondition (opened fridge)") != std::string::npos,
         "iteration 0 did not fail at the put");
  expect(second.find("precondition (not (doorway-blocked fridge))") != std::string::npos,
         "iteration 1 did not fail on the blocking position");

  const std::string expected = std::string("Prompt history of E1.0 (3 versions)\n\nInitial (v0):\n  \"") + kInitialPrompt +
                               "\"\n\nIteration 0 (v1)\n  Before:\n    \"" + kInitialPrompt + "\"\n  After:\n    Append \"" +
                               kHint1 + "\"\n    Meta-prompt updated to \"" + kMeta1 +
                               "\"\n\nIteration 1 (v2)\n  Before:\n    Includes previous update\n  After:\n    Append \"" +
                               kHint2 + "\"\n    Meta-prompt updated to \"" + kMeta2 + "\"\n";
  const auto history = cli::prompt_history(o.state.trace.records(), "E1.0");
  expect(history == expected, "prompt history differs:\n" + history);

  expect(o.plan.has_value(), "no merged plan");
  const auto& p = *o.plan;
  std::optional<std::size_t> open;
  std::optional<std::size_t> put;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.actions[i].name == "(open robot1 fridge)") open = i;
    if (p.actions[i].name == "(put robot0 tomato fridge)") put = i;
  }
  expect(open && put && p.has_edge(*open, *put), "edge Open before Put missing");
  return "3 iterations, prompt history matches, Open before Put";
}

// --- 6 -----------------------------------------------------------------------

std::string k_max() {
  hierarchy::Session session;
  expect(session.options.k_max == kKMax, "default k_max is not 5");
  const auto o = replay(kFailing, "kitchen", "kmax_failure", session);
  expect(!o.success, "failing cassette succeeded");
  expect(o.iterations == kKMax, std::to_string(o.iterations) + " iterations");
  const std::size_t bound = kKMax * o.state.agents.size() * hierarchy::kCallsPerAgent;
  expect(o.backend_calls <= bound, std::to_string(o.backend_calls) + " calls exceed " + std::to_string(bound));
  return "failure after 5 iterations, " + std::to_string(o.backend_calls) + " calls <= " + std::to_string(bound);
}

// --- 7 -----------------------------------------------------------------------

int second_run(bool sharing) {
  hierarchy::Options opts;
  opts.sharing = sharing;
  hierarchy::Session session(opts);
  const std::string name = sharing ? "sharing_on" : "sharing_off";
  const auto a = replay(kCaseStudy, "kitchen", name, session);
  expect(a.success, name + ": first task failed");
  const auto b = replay(kSecondTask, "larder", name, session);
  expect(b.success, name + ": second task failed");
  return b.iterations;
}

std::string sharing() {
  const int on = second_run(true);
  const int off = second_run(false);
  expect(on < off, "sharing " + std::to_string(on) + " vs " + std::to_string(off) + " iterations");
  return "second task: " + std::to_string(on) + " iteration(s) with sharing, " + std::to_string(off) + " without";
}

// --- 8 -----------------------------------------------------------------------

double fold_gap(const json& rows, const eval::MetricsReport& report) {
  double worst = 0;
  for (const auto& r : rows) {
    const auto& mine = report.row(r.at("label").get<std::string>());
    expect(mine.episodes == r.at("episodes").get<std::size_t>(), "episode count differs");
    const std::vector<std::pair<std::string, double>> values = {
        {"sr", mine.sr}, {"gcr", mine.gcr}, {"ru", mine.ru}, {"eff", mine.eff}};
    for (const auto& [key, v] : values) {
      expect(v >= 0 && v <= 1, key + " out of [0,1]");
      worst = std::max(worst, std::abs(v - r.at(key).get<double>()));
    }
  }
  return worst;
}

std::string metrics() {
  const auto dir = data("fixtures/metrics");
  const auto truths = json::parse(util::read_file(dir / "truths.json"));
  const auto cases = testing::cases_from_truths(truths);
  std::vector<eval::EpisodeResult> episodes;
  for (const auto& j : util::read_jsonl(dir / "episodes.jsonl")) episodes.push_back(eval::EpisodeResult::from_json(j));
  expect(episodes.size() == 10, "fixture must hold 10 episodes");

  const auto report = eval::metrics(episodes, cases);
  const auto out = testing::scratch_dir("acceptance-fold") / "fold.json";
  const auto folded = testing::fold_with_script(dir / "episodes.jsonl", dir / "truths.json", out);
  const double gap = fold_gap(folded.at("rows"), report);
  expect(gap <= kMetricTolerance, "largest difference " + std::to_string(gap));

  for (const auto& e : episodes) {
    if (!e.success) continue;
    const auto it = std::find_if(cases.begin(), cases.end(), [&](const auto& c) { return c.id == e.task; });
    expect(eval::goal_recall(e, *it) == 1.0, e.task + ": success without GCR 1");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max difference %.3g", gap);
  return std::string("10 episodes, ") + buf;
}

// --- 9 -----------------------------------------------------------------------

std::string determinism() {
  const auto root = testing::scratch_dir("acceptance-eval");
  std::vector<std::string> dirs;
  for (const char* run : {"a", "b"}) {
    std::ostringstream out;
    std::ostringstream err;
    const auto dir = (root / run).string();
    const int code = cli::run({"eval", "--suite", data("suite").string(), "--cassette", cassette("suite"), "--out", dir},
                              out, err);
    expect(code == cli::kExitSuccess, "eval exited " + std::to_string(code) + ": " + err.str());
    dirs.push_back(dir);
  }
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dirs[0])) {
    const auto other = std::filesystem::path(dirs[1]) / e.path().filename();
    expect(std::filesystem::exists(other), e.path().filename().string() + " missing in the second run");
    expect(util::read_file(e.path()) == util::read_file(other), e.path().filename().string() + " differs");
    ++files;
  }
  expect(files == 4, std::to_string(files) + " report files");
  return "4 report files byte-identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"PDDL round-trip", round_trip},
      {"transition semantics", transitions},
      {"planner soundness and optimality", planner_optimality},
      {"partial-order correctness", partial_order},
      {"case-study replay", case_study},
      {"K_max enforcement", k_max},
      {"meta-prompt sharing", sharing},
      {"metrics correctness", metrics},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string status = "PASS";
    std::string detail;
    try {
      detail = criteria[i].second();
    } catch (const std::exception& e) {
      status = "FAIL";
      detail = e.what();
      ++failed;
    }
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.2f s", seconds_since(t0));
    std::cout << "criterion " << i + 1 << " " << status << "  " << criteria[i].first << ": " << detail << " (" << secs
              << ")\n";
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << "\n";
  return failed == 0 ? 0 : 1;
}
