#include "hmap/eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <future>
#include <random>
#include <set>

#include "hmap/hierarchy/orchestrate.hpp"
#include "hmap/util/jsonl.hpp"
#include "hmap/util/text.hpp"

namespace hmap::eval {

using nlohmann::json;

FaultSpec FaultSpec::random(const pddl::GroundTask& env, const multirobot::PartialOrderPlan& plan, std::uint64_t seed,
                            double rate) {
  FaultSpec spec;
  if (plan.size() == 0 || rate <= 0) return spec;
  std::mt19937_64 rng(seed);
  if (std::uniform_real_distribution<double>(0, 1)(rng) >= rate) return spec;
  const auto order = plan.canonical_order();
  const auto& step = plan.actions[order[std::uniform_int_distribution<std::size_t>(0, order.size() - 1)(rng)]];
  const auto id = env.find_action(step.name);
  if (!id) return spec;
  std::vector<std::string> positive;
  for (const auto p : env.actions[*id].pre_pos) positive.push_back(env.atom_str(p));
  if (positive.empty()) return spec;
  spec.faults.push_back({step.name, positive[std::uniform_int_distribution<std::size_t>(0, positive.size() - 1)(rng)]});
  return spec;
}

namespace {

std::vector<std::string> achieved_goals(const pddl::GroundTask& env, const pddl::State& s) {
  std::vector<std::string> out;
  for (const auto& g : env.problem.goal) {
    const auto id = env.lookup(g);
    const bool holds = id ? s.contains(id->first) == id->second : !g.positive;
    if (holds) out.push_back(g.str());
  }
  return out;
}

}  // namespace

ExecutionTrace execute_symbolic(const pddl::GroundTask& env, const multirobot::PartialOrderPlan& plan,
                                const pddl::State& init, const FaultSpec& faults) {
  ExecutionTrace tr;
  pddl::State s = init;
  tr.states.push_back(env.describe(s));
  std::vector<bool> used(faults.faults.size(), false);
  auto fail = [&](pddl::FailureKind kind, std::size_t step, std::string action, std::string violated) {
    tr.report.valid = false;
    tr.report.kind = kind;
    tr.report.step = step;
    tr.report.action = std::move(action);
    tr.report.violated = std::move(violated);
  };

  const auto order = plan.canonical_order();
  for (std::size_t i = 0; i < order.size() && tr.report.valid; ++i) {
    const std::string& name = plan.actions[order[i]].name;
    for (std::size_t f = 0; f < faults.faults.size(); ++f) {
      if (used[f] || faults.faults[f].before != name) continue;
      used[f] = true;
      tr.injected.push_back(faults.faults[f]);
      const std::string atom = util::to_lower(util::trim(faults.faults[f].atom));
      for (const auto id : s.ids()) {
        if (env.atom_str(id) == atom) {
          const std::vector<pddl::AtomId> del(1, id);
          s = s.with({}, del);
          break;
        }
      }
    }
    const auto id = env.find_action(name);
    if (!id) {
      fail(pddl::FailureKind::unknown_action, i, name, "");
      break;
    }
    const auto& act = env.actions[*id];
    if (const auto v = pddl::first_violation(env, s, act)) {
      fail(pddl::FailureKind::precondition, i, name, *v);
      break;
    }
    s = pddl::apply(env, s, act);
    tr.steps.push_back(name);
    tr.states.push_back(env.describe(s));
  }
  tr.achieved = achieved_goals(env, s);
  if (tr.report.valid && tr.achieved.size() != env.problem.goal.size()) {
    tr.report.valid = false;
    tr.report.kind = pddl::FailureKind::goal;
    for (const auto& g : env.problem.goal) {
      if (std::find(tr.achieved.begin(), tr.achieved.end(), g.str()) == tr.achieved.end()) {
        tr.report.unsatisfied_goals.push_back(g.str());
      }
    }
  }
  tr.report.state = env.describe(s);
  std::sort(tr.report.state.begin(), tr.report.state.end());
  tr.report.state_digest = pddl::state_digest(tr.report.state);
  tr.success = tr.report.valid;
  return tr;
}

json EpisodeResult::to_json() const {
  return {{"task", task},
          {"seed", seed},
          {"success", success},
          {"achieved", achieved},
          {"plan_actions", plan_actions},
          {"plan_makespan", plan_makespan},
          {"iterations", iterations},
          {"backend_calls", backend_calls},
          {"failure", failure}};
}

EpisodeResult EpisodeResult::from_json(const json& j) {
  EpisodeResult r;
  r.task = j.at("task");
  r.seed = j.at("seed");
  r.success = j.at("success");
  r.achieved = j.at("achieved").get<std::vector<std::string>>();
  r.plan_actions = j.at("plan_actions");
  r.plan_makespan = j.at("plan_makespan");
  r.iterations = j.at("iterations");
  r.backend_calls = j.value("backend_calls", std::size_t{0});
  r.failure = j.value("failure", "");
  return r;
}

json MetricRow::to_json() const {
  return {{"label", label}, {"episodes", episodes}, {"successes", successes},
          {"sr", sr}, {"gcr", gcr}, {"ru", ru}, {"eff", eff}};
}

const MetricRow& MetricsReport::row(const std::string& label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw std::out_of_range("no metrics row '" + label + "'");
}

json MetricsReport::to_json() const {
  json a = json::array();
  for (const auto& r : rows) a.push_back(r.to_json());
  return {{"rows", a}};
}

std::string MetricsReport::table() const {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> cells{{"Category", "Episodes", "SR", "GCR", "RU", "Eff"}};
  for (const auto& r : rows) {
    cells.push_back({r.label, std::to_string(r.episodes), fmt(r.sr), fmt(r.gcr),
                     r.successes ? fmt(r.ru) : "-", r.successes ? fmt(r.eff) : "-"});
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - row[c].size();
      line += c == 0 ? row[c] + std::string(pad, ' ') : std::string(pad, ' ') + row[c];
      if (c + 1 < row.size()) line += "  ";
    }
    out += line + "\n";
  }
  return out;
}

double goal_recall(const EpisodeResult& r, const TaskCase& t) {
  if (r.success) return 1.0;
  std::size_t hit = 0;
  for (const auto& g : t.goal) hit += std::count(r.achieved.begin(), r.achieved.end(), g) > 0;
  return static_cast<double>(hit) / static_cast<double>(t.goal.size());
}

double utilization(const EpisodeResult& r, const TaskCase& t) {
  if (r.plan_actions == 0) return 1.0;
  return std::min(1.0, static_cast<double>(t.gt_actions) / static_cast<double>(r.plan_actions));
}

double efficiency(const EpisodeResult& r, const TaskCase& t) {
  if (r.plan_makespan == 0) return 1.0;
  return std::min(1.0, static_cast<double>(t.gt_makespan) / static_cast<double>(r.plan_makespan));
}

namespace {

// Sorted before summing so the mean does not depend on episode order.
double mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

MetricRow fold(const std::string& label, const std::vector<std::pair<const EpisodeResult*, const TaskCase*>>& eps) {
  MetricRow row;
  row.label = label;
  row.episodes = eps.size();
  std::vector<double> sr, gcr, ru, eff;
  for (const auto& [r, t] : eps) {
    sr.push_back(r->success ? 1.0 : 0.0);
    gcr.push_back(goal_recall(*r, *t));
    if (r->success) {
      ++row.successes;
      ru.push_back(utilization(*r, *t));
      eff.push_back(efficiency(*r, *t));
    }
  }
  row.sr = mean(sr);
  row.gcr = mean(gcr);
  row.ru = mean(ru);
  row.eff = mean(eff);
  return row;
}

}  // namespace

MetricsReport metrics(std::span<const EpisodeResult> results, std::span<const TaskCase> cases) {
  std::map<std::string, const TaskCase*> by_id;
  for (const auto& c : cases) by_id[c.id] = &c;
  std::map<Category, std::vector<std::pair<const EpisodeResult*, const TaskCase*>>> by_cat;
  std::vector<std::pair<const EpisodeResult*, const TaskCase*>> all;
  for (const auto& r : results) {
    const auto it = by_id.find(r.task);
    if (it == by_id.end()) throw SuiteError("result for unknown task '" + r.task + "'");
    by_cat[it->second->category].emplace_back(&r, it->second);
    all.emplace_back(&r, it->second);
  }
  MetricsReport rep;
  for (const auto& [cat, eps] : by_cat) rep.rows.push_back(fold(std::string(to_string(cat)), eps));
  rep.rows.push_back(fold("all", all));
  return rep;
}

EpisodeResult run_episode(const TaskCase& task, std::uint64_t seed, llm::Backend& backend, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  EpisodeResult r;
  r.task = task.id;
  r.seed = seed;
  r.achieved = achieved_goals(task.env.task, task.env.task.init);
  try {
    hierarchy::Session session(config.options);
    const auto out = hierarchy::orchestrate(task.instruction, task.env, backend, session);
    r.iterations = out.iterations;
    r.backend_calls = out.backend_calls;
    if (!out.success) {
      r.failure = out.last_failure ? std::string(promptopt::to_string(out.last_failure->cls)) : "failure";
    } else {
      const auto& plan = *out.plan;
      r.plan_actions = plan.size();
      r.plan_makespan = multirobot::makespan(plan);
      FaultSpec faults;
      if (const auto it = config.faults.find(task.id); it != config.faults.end()) {
        faults = it->second;
      } else {
        faults = FaultSpec::random(task.env.task, plan, seed, config.fault_rate);
      }
      const auto tr = execute_symbolic(task.env.task, plan, task.env.task.init, faults);
      r.achieved = tr.achieved;
      r.success = tr.success;
      if (!tr.success) r.failure = "execution: " + std::string(pddl::to_string(tr.report.kind));
    }
  } catch (const std::exception& e) {
    r.success = false;
    r.failure = std::string("error: ") + e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

SuiteReport run_suite(std::span<const TaskCase> cases, llm::Backend& backend, const RunConfig& config) {
  struct Job {
    std::size_t task;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < cases.size(); ++t) {
    for (int s = 0; s < config.seeds; ++s) jobs.push_back({t, static_cast<std::uint64_t>(s)});
  }
  SuiteReport rep;
  rep.episodes.resize(jobs.size());
  const std::size_t width = std::max<std::size_t>(1, config.parallel);
  for (std::size_t begin = 0; begin < jobs.size(); begin += width) {
    const std::size_t end = std::min(jobs.size(), begin + width);
    if (width == 1) {
      rep.episodes[begin] = run_episode(cases[jobs[begin].task], jobs[begin].seed, backend, config);
      continue;
    }
    std::vector<std::future<EpisodeResult>> futs;
    for (std::size_t i = begin; i < end; ++i) {
      futs.push_back(std::async(std::launch::async, [&, i] {
        return run_episode(cases[jobs[i].task], jobs[i].seed, backend, config);
      }));
    }
    for (std::size_t i = begin; i < end; ++i) rep.episodes[i] = futs[i - begin].get();
  }
  rep.metrics = metrics(rep.episodes, cases);
  return rep;
}

json truths_json(std::span<const TaskCase> cases) {
  json a = json::array();
  for (const auto& c : cases) {
    a.push_back({{"id", c.id}, {"category", to_string(c.category)}, {"goal", c.goal},
                 {"gt_actions", c.gt_actions}, {"gt_makespan", c.gt_makespan}});
  }
  return a;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const SuiteReport& report,
                                                std::span<const TaskCase> cases) {
  std::filesystem::create_directories(dir);
  std::string lines;
  for (const auto& e : report.episodes) lines += e.to_json().dump() + "\n";
  const auto episodes = dir / "episodes.jsonl";
  const auto truths = dir / "truths.json";
  const auto metrics_path = dir / "metrics.json";
  const auto table = dir / "table.txt";
  util::write_file(episodes, lines);
  util::write_file(truths, truths_json(cases).dump(2) + "\n");
  util::write_file(metrics_path, report.metrics.to_json().dump(2) + "\n");
  util::write_file(table, report.metrics.table());
  return {episodes, truths, metrics_path, table};
}

}  // namespace hmap::eval
