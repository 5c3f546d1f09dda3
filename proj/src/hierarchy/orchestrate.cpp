#include "hmap/hierarchy/orchestrate.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <set>

#include "hmap/llm/schema.hpp"
#include "hmap/pddl/parser.hpp"
#include "hmap/promptopt/update.hpp"
#include "hmap/util/text.hpp"

namespace hmap::hierarchy {

using promptopt::Diagnostic;
using promptopt::LossClass;

namespace {

// Counts the calls of one run even when the backend is shared.
class CountingBackend : public llm::Backend {
 public:
  explicit CountingBackend(llm::Backend& inner) : inner_(inner) {}

 protected:
  std::string do_invoke(const llm::Request& request) override { return inner_.invoke(request); }

 private:
  llm::Backend& inner_;
};

struct Failure {
  std::string agent;
  LossClass cls;
  promptopt::Evidence evidence;
};

bool is_leaf(const HierarchyState& s, const Agent& a) { return a.layer == s.options.layers - 1; }

std::string assign_line(const HierarchyState& s, const Agent& a, const Environment& env) {
  const int layers = s.options.layers;
  if (a.layer == layers - 1) return "Generate PDDL for: " + a.target + " (" + env.team.type_of.at(a.target) + ")";
  std::vector<std::string> parts;
  if (a.layer == layers - 2) {
    for (const auto& r : env.team.robots) {
      const auto& t = env.team.type_of.at(r);
      if (a.target.empty() || a.target == t) parts.push_back(r + " (" + t + ")");
    }
    return "Assign to: robots " + util::join(parts, ", ");
  }
  for (const auto& t : env.team.types()) {
    if (a.target.empty() || a.target == t) parts.push_back(t);
  }
  return "Assign to: robot types " + util::join(parts, ", ");
}

std::string build_task(const HierarchyState& s, const Agent& a, const Environment& env) {
  std::string t = a.parent ? "Subtask: " + a.subtask : "Instruction: " + a.subtask;
  t += "\n" + assign_line(s, a, env);
  if (!a.preceded_by.empty()) t += "\nPreceded by: " + util::join(a.preceded_by, "; ");
  return t + "\n\n" + env.describe();
}

Agent& create_agent(HierarchyState& s, const Environment& env, int layer, std::optional<std::string> parent,
                    std::string subtask, std::string target, std::vector<std::string> preceded) {
  if (s.next_index.size() < static_cast<std::size_t>(s.options.layers)) s.next_index.resize(s.options.layers, 0);
  Agent a;
  a.id = "E" + std::to_string(layer) + "." + std::to_string(s.next_index[layer]++);
  a.layer = layer;
  a.parent = std::move(parent);
  a.subtask = std::move(subtask);
  a.target = std::move(target);
  a.preceded_by = std::move(preceded);
  a.prompt = default_prompt(a.id, layer, s.options.layers);
  a.replanning_prompt = default_replanning_prompt(layer, s.options.layers);
  a.task = build_task(s, a, env);
  s.trace.add("agent", {{"id", a.id}, {"layer", layer}, {"parent", a.parent.value_or("")}, {"target", a.target},
                        {"subtask", a.subtask}, {"preceded_by", a.preceded_by}});
  s.agents.push_back(std::move(a));
  s.phi.push_back(s.agents.back().id);
  s.record_prompt(s.agents.back().prompt);
  return s.agents.back();
}

void add_children(HierarchyState& s, const Environment& env, const std::string& parent_id,
                  const std::vector<Subtask>& subtasks) {
  std::map<std::string, std::string> agent_of;  // subtask id -> agent id
  std::map<std::string, std::string> text_of;
  for (const auto& st : subtasks) text_of[st.id] = st.text;
  for (const auto& st : subtasks) {
    std::vector<std::string> preceded = s.agent(parent_id).preceded_by;
    for (const auto& d : st.depends_on) preceded.push_back(text_of.at(d));
    const std::string parent_copy = parent_id;
    Agent& child = create_agent(s, env, s.agent(parent_id).layer + 1, parent_copy, st.text, st.target, preceded);
    agent_of[st.id] = child.id;
    s.agent(parent_id).children.push_back(child.id);
  }
  for (const auto& st : subtasks) {
    for (const auto& d : st.depends_on) s.agent(agent_of.at(st.id)).depends_on.push_back(agent_of.at(d));
  }
}

std::optional<Failure> top_down(HierarchyState& s, const Environment& env, llm::Backend& backend) {
  std::optional<Failure> first;
  const int layers = s.options.layers;
  for (int l = 0; l < layers; ++l) {
    std::vector<std::string> ids;
    for (const auto& id : s.phi) {
      if (s.agent(id).layer == l) ids.push_back(id);
    }
    struct Call {
      std::string id;
      llm::Request request;
      std::string digest;
    };
    std::vector<Call> calls;
    for (const auto& id : ids) {
      const Agent& a = s.agent(id);
      llm::Request req = agent_request(s, a);
      std::string d = llm::digest(req);
      if (a.output && a.output->request_digest == d) continue;
      calls.push_back({id, std::move(req), std::move(d)});
    }

    // Responses (or error texts) in call order, whatever the scheduling.
    std::vector<std::pair<bool, std::string>> results(calls.size());
    auto run = [&backend](const llm::Request& req) -> std::pair<bool, std::string> {
      try {
        return {true, backend.invoke(req)};
      } catch (const std::exception& e) {
        return {false, e.what()};
      }
    };
    const std::size_t width = std::max<std::size_t>(1, s.options.threads);
    for (std::size_t start = 0; start < calls.size(); start += width) {
      const std::size_t end = std::min(calls.size(), start + width);
      if (end - start == 1) {
        results[start] = run(calls[start].request);
        continue;
      }
      std::vector<std::future<std::pair<bool, std::string>>> futures;
      for (std::size_t i = start; i < end; ++i) {
        futures.push_back(std::async(std::launch::async, run, std::cref(calls[i].request)));
      }
      for (std::size_t i = start; i < end; ++i) results[i] = futures[i - start].get();
    }

    for (std::size_t i = 0; i < calls.size(); ++i) {
      const auto& c = calls[i];
      s.trace.add("request", {{"agent", c.id}, {"role", llm::to_string(c.request.role)}, {"digest", c.digest}});
      const auto gone = s.prune_children(c.id);
      if (!gone.empty()) s.trace.add("prune", {{"agent", c.id}, {"removed", gone}});
      AgentOutput out;
      out.request_digest = c.digest;
      const auto& [ok, text] = results[i];
      if (!ok) {
        out.failure = LossClass::malformed_response;
        out.diagnostic = {"backend", text, 0, 0};
      } else if (l < layers - 1) {
        try {
          out.subtasks = parse_subtasks(text, s.agent(c.id), env, layers);
        } catch (const llm::SchemaError& e) {
          out.failure = LossClass::malformed_response;
          out.diagnostic = {"response", e.what(), 0, 0};
        }
      } else {
        try {
          out.spec = parse_spec(text, s.agent(c.id));
        } catch (const llm::SchemaError& e) {
          out.failure = LossClass::malformed_response;
          out.diagnostic = {"response", e.what(), 0, 0};
        } catch (const pddl::ParseError& e) {
          // parse_spec tags which text failed in the message prefix.
          const std::string which = util::starts_with(e.detail(), "domain") ? "domain" : "problem";
          out.failure = LossClass::parse;
          out.diagnostic = {which, e.detail().substr(which.size() + 2), static_cast<std::size_t>(e.line()),
                            static_cast<std::size_t>(e.column())};
        }
      }
      s.agent(c.id).output = out;
      if (!out.failure) add_children(s, env, c.id, out.subtasks);
    }

    for (const auto& id : ids) {
      const Agent& a = s.agent(id);
      if (!first && a.output && a.output->failure) first = Failure{id, *a.output->failure, a.output->diagnostic};
    }
  }
  return first;
}

std::vector<std::string> leaf_descendants(const HierarchyState& s, const std::string& id) {
  const Agent& a = s.agent(id);
  if (is_leaf(s, a)) return {id};
  std::vector<std::string> out;
  for (const auto& c : a.children) {
    if (!s.agent(c).live) continue;
    const auto sub = leaf_descendants(s, c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

struct LeafOrder {
  std::vector<std::string> leaves;
  std::vector<multirobot::Edge> deps;  // indices into leaves
};

LeafOrder order_leaves(const HierarchyState& s) {
  std::vector<std::string> leaves = leaf_descendants(s, s.root().id);
  std::map<std::string, std::size_t> creation;
  for (std::size_t i = 0; i < s.agents.size(); ++i) creation[s.agents[i].id] = i;
  std::sort(leaves.begin(), leaves.end(), [&](const auto& a, const auto& b) { return creation[a] < creation[b]; });
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < leaves.size(); ++i) pos[leaves[i]] = i;

  std::set<multirobot::Edge> deps;
  for (const auto& leaf : leaves) {
    for (std::string cur = leaf; s.agent(cur).parent; cur = *s.agent(cur).parent) {
      for (const auto& d : s.agent(cur).depends_on) {
        for (const auto& before : leaf_descendants(s, d)) deps.insert({pos.at(before), pos.at(leaf)});
      }
    }
  }
  LeafOrder lo;
  lo.deps.assign(deps.begin(), deps.end());
  for (auto i : multirobot::subtask_order(leaves.size(), lo.deps)) lo.leaves.push_back(leaves[i]);
  // Re-index the edges to the new order.
  std::map<std::size_t, std::size_t> rank;
  for (std::size_t i = 0; i < lo.leaves.size(); ++i) rank[pos.at(lo.leaves[i])] = i;
  for (auto& [a, b] : lo.deps) {
    a = rank.at(a);
    b = rank.at(b);
  }
  std::sort(lo.deps.begin(), lo.deps.end());
  return lo;
}

struct Solved {
  std::optional<pddl::GroundTask> task;
  planner::SolveResult result;
  std::optional<Failure> failure;
};

Solved solve_leaf(const Agent& a, const planner::SearchBudget& budget) {
  Solved out;
  const SubPlanSpec& spec = *a.output->spec;
  try {
    const auto d = pddl::parse_domain(spec.domain_text);
    out.task = pddl::ground(d, pddl::parse_problem(spec.problem_text, d));
  } catch (const pddl::GroundingError& e) {
    out.failure = Failure{a.id, LossClass::budget, Diagnostic{"grounding", e.what(), 0, 0}};
    return out;
  }
  out.result = planner::solve(*out.task, budget);
  if (const auto* u = std::get_if<planner::Unsolvable>(&out.result)) {
    out.failure = Failure{a.id, LossClass::unsolvable,
                          Diagnostic{"search", "no plan exists after expanding " + std::to_string(u->expanded) +
                                                   " states", 0, 0}};
  } else if (const auto* b = std::get_if<planner::BudgetExhausted>(&out.result)) {
    out.failure = Failure{a.id, LossClass::budget,
                          Diagnostic{"search", "stopped after " + std::to_string(b->expanded) + " expansions", 0, 0}};
  }
  return out;
}

struct Validated {
  std::vector<LeafResult> leaves;
  std::optional<multirobot::PartialOrderPlan> plan;
  std::optional<Failure> failure;
};

Validated validate(HierarchyState& s, const Environment& env) {
  Validated v;
  LeafOrder lo;
  try {
    lo = order_leaves(s);
  } catch (const multirobot::CycleError& e) {
    v.failure = Failure{s.root().id, LossClass::validation, Diagnostic{"dependencies", e.what(), 0, 0}};
    return v;
  }

  std::vector<Solved> solved(lo.leaves.size());
  if (s.options.threads > 1) {
    std::vector<std::future<Solved>> futures;
    for (const auto& id : lo.leaves) {
      futures.push_back(std::async(std::launch::async, solve_leaf, std::cref(s.agent(id)), s.options.budget));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) solved[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < lo.leaves.size(); ++i) solved[i] = solve_leaf(s.agent(lo.leaves[i]), s.options.budget);
  }

  pddl::State state = env.task.init;
  std::vector<multirobot::SubPlan> subplans;
  for (std::size_t i = 0; i < lo.leaves.size(); ++i) {
    const Agent& a = s.agent(lo.leaves[i]);
    if (solved[i].failure) {
      v.failure = solved[i].failure;
      return v;
    }
    const pddl::GroundTask& own = *solved[i].task;
    LeafResult lr{a.id, a.target, *a.output->spec, {}};
    for (auto id : std::get<planner::Plan>(solved[i].result).steps) {
      const auto& ga = own.actions[id];
      lr.plan.push_back(ga.name());
      if (!env.team.can(a.target, ga.schema) || ga.robot != a.target) {
        v.failure = Failure{a.id, LossClass::validation,
                            Diagnostic{"capability", ga.name() + " is not a skill of " + a.target, 0, 0}};
        return v;
      }
    }
    const std::vector<pddl::Literal> goal = own.problem.goal;
    const auto report = pddl::validate_plan(env.task, state, lr.plan, goal);
    s.trace.add("validation", {{"agent", a.id}, {"plan", lr.plan}, {"report", report.to_json()}});
    if (!report.valid) {
      v.failure = Failure{a.id, promptopt::classify(report), report};
      return v;
    }
    state = pddl::execute_prefix(env.task, state, lr.plan);
    multirobot::SubPlan sp{i, a.target, {}};
    for (const auto& name : lr.plan) {
      sp.steps.push_back(multirobot::PlanStep::from(env.task, env.task.actions[*env.task.find_action(name)]));
    }
    subplans.push_back(std::move(sp));
    v.leaves.push_back(std::move(lr));
  }

  auto merged = multirobot::merge_subplans(subplans, lo.leaves.size(), lo.deps);
  const std::vector<pddl::Literal> goal = env.problem.goal;
  const auto report = multirobot::validate_order(env.task, env.task.init, merged, merged.canonical_order(), goal);
  s.trace.add("validation", {{"agent", s.root().id}, {"plan", merged.canonical_names()}, {"report", report.to_json()}});
  if (!report.valid) {
    v.failure = Failure{s.root().id, promptopt::classify(report), report};
    return v;
  }
  v.plan = std::move(merged);
  return v;
}

}  // namespace

Session::Session(Options opts) : options(opts) {
  for (int l = 0; l < options.layers; ++l) meta.push_back(default_meta(l));
}

llm::Request agent_request(const HierarchyState& state, const Agent& agent) {
  const bool leaf = agent.layer == state.options.layers - 1;
  return llm::Request{leaf ? llm::Role::generate_pddl : llm::Role::decompose, agent.prompt.text(),
                      state.meta.at(agent.layer).text(), agent.task,
                      leaf ? llm::schema::kPddl : llm::schema::kSubtasks};
}

std::vector<Subtask> parse_subtasks(const std::string& response, const Agent& agent, const Environment& env,
                                    int layers) {
  const auto j = llm::parse_response(llm::schema::kSubtasks, response);
  std::vector<Subtask> out;
  for (const auto& st : j.at("subtasks")) {
    Subtask t{st.at("id"), st.at("text"), st.at("target"), st.value("depends_on", std::vector<std::string>{})};
    if (agent.layer == layers - 2) {
      const auto it = env.team.type_of.find(t.target);
      if (it == env.team.type_of.end()) throw llm::SchemaError("target '" + t.target + "' is not a robot");
      if (!agent.target.empty() && it->second != agent.target) {
        throw llm::SchemaError("robot '" + t.target + "' is not of type " + agent.target);
      }
    } else {
      const auto types = env.team.types();
      if (std::find(types.begin(), types.end(), t.target) == types.end()) {
        throw llm::SchemaError("target '" + t.target + "' is not a robot type");
      }
      if (!agent.target.empty() && t.target != agent.target) {
        throw llm::SchemaError("robot type '" + t.target + "' differs from " + agent.target);
      }
    }
    out.push_back(std::move(t));
  }
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < out.size(); ++i) idx[out[i].id] = i;
  std::vector<multirobot::Edge> deps;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& d : out[i].depends_on) deps.emplace_back(idx.at(d), i);
  }
  try {
    multirobot::subtask_order(out.size(), deps);
  } catch (const multirobot::CycleError&) {
    throw llm::SchemaError("subtask dependencies contain a cycle");
  }
  return out;
}

SubPlanSpec parse_spec(const std::string& response, const Agent& agent) {
  const auto j = llm::parse_response(llm::schema::kPddl, response);
  SubPlanSpec spec{agent.id, j.at("domain"), j.at("problem"), agent.target};
  pddl::Domain d;
  try {
    d = pddl::parse_domain(spec.domain_text);
  } catch (const pddl::ParseError& e) {
    throw pddl::ParseError("domain: " + e.detail(), e.line(), e.column());
  }
  try {
    pddl::parse_problem(spec.problem_text, d);
  } catch (const pddl::ParseError& e) {
    throw pddl::ParseError("problem: " + e.detail(), e.line(), e.column());
  }
  return spec;
}

std::string escalate(HierarchyState& state, const std::string& source, const promptopt::TextualLoss& loss,
                     llm::Backend& backend) {
  std::string cur = source;
  std::vector<std::string> path{cur};
  while (state.agent(cur).parent) {
    const Agent& a = state.agent(cur);
    const llm::Request req{llm::Role::decide, a.replanning_prompt, "",
                           "Agent: " + a.id + " (layer " + std::to_string(a.layer) + " of " +
                               std::to_string(state.options.layers) + ")\n" + loss.prose,
                           llm::schema::kDecision};
    const std::string d = llm::digest(req);
    state.trace.add("request", {{"agent", a.id}, {"role", "decide"}, {"digest", d}});
    std::string decision;
    try {
      decision = llm::parse_response(req.schema, backend.invoke(req)).at("decision");
    } catch (const std::exception& e) {
      state.trace.add("decision-error", {{"agent", a.id}, {"error", e.what()}});
    }
    if (decision == "self") break;
    if (decision != "parent") state.trace.add("decision-unrecognized", {{"agent", a.id}, {"decision", decision}});
    cur = *a.parent;
    path.push_back(cur);
  }
  state.trace.add("escalation", {{"from", source}, {"to", cur}, {"path", path}});
  if (!state.in_phi(cur)) state.phi.push_back(cur);
  return cur;
}

Outcome orchestrate(const std::string& instruction, const Environment& env, llm::Backend& shared,
                    Session& session) {
  CountingBackend backend(shared);
  HierarchyState s;
  s.options = session.options;
  s.meta = session.meta;
  s.next_index.assign(s.options.layers, 0);
  for (const auto& m : s.meta) s.record_prompt(m);
  create_agent(s, env, 0, std::nullopt, instruction, "", {});

  Outcome out;
  while (true) {
    if (s.k == s.options.k_max) {
      out.iterations = s.options.k_max;
      break;
    }
    s.trace.add("iteration", {{"k", s.k}});
    std::optional<Failure> failure = top_down(s, env, backend);
    Validated v;
    if (!failure) {
      v = validate(s, env);
      failure = v.failure;
    }
    if (!failure) {
      out.success = true;
      out.iterations = s.k + 1;
      out.leaves = std::move(v.leaves);
      out.plan = std::move(v.plan);
      break;
    }

    const Agent& failed = s.agent(failure->agent);
    const std::string failed_subtask = failed.subtask;
    const auto probe = promptopt::loss_fn(failed.prompt, failed.id, failure->cls, failure->evidence, failed_subtask);
    s.trace.add("failure", {{"agent", failure->agent}, {"class", promptopt::to_string(failure->cls)},
                            {"prose", probe.prose}});
    const std::string target = escalate(s, failure->agent, probe, backend);
    const auto loss = promptopt::loss_fn(s.agent(target).prompt, target, failure->cls, failure->evidence,
                                         failed_subtask);
    out.last_failure = loss;
    try {
      promptopt::prompt_update(s, {{target, loss}}, backend);
    } catch (const std::exception& e) {
      s.trace.add("update-error", {{"error", e.what()}});
    }
    ++s.k;
  }
  s.trace.add("outcome", {{"success", out.success}, {"iterations", out.iterations}});
  session.meta = s.meta;
  out.backend_calls = backend.calls();
  out.state = std::move(s);
  return out;
}

}  // namespace hmap::hierarchy
