#include "hmap/pddl/validate.hpp"

#include "hmap/util/jsonl.hpp"
#include "hmap/util/text.hpp"

namespace hmap::pddl {

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::none: return "none";
    case FailureKind::precondition: return "precondition";
    case FailureKind::goal: return "goal";
    case FailureKind::unknown_action: return "unknown-action";
  }
  return "none";
}

namespace {

FailureKind kind_from_string(const std::string& s) {
  if (s == "precondition") return FailureKind::precondition;
  if (s == "goal") return FailureKind::goal;
  if (s == "unknown-action") return FailureKind::unknown_action;
  return FailureKind::none;
}

void snapshot(const GroundTask& task, const State& s, ValidationReport& r) {
  r.state = task.describe(s);
  r.state_digest = state_digest(r.state);
}

bool literal_holds(const GroundTask& task, const State& s, const Literal& l) {
  auto id = task.atoms.find(l.atom);
  const bool present = id && s.contains(*id);
  return present == l.positive;
}

}  // namespace

std::string state_digest(const std::vector<std::string>& sorted_atoms) {
  return util::sha256_hex(util::join(sorted_atoms, "\n")).substr(0, 16);
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["valid"] = valid;
  j["kind"] = std::string(to_string(kind));
  j["step"] = step ? nlohmann::json(*step) : nlohmann::json(nullptr);
  j["action"] = action;
  j["violated"] = violated;
  j["unsatisfied_goals"] = unsatisfied_goals;
  j["state"] = state;
  j["state_digest"] = state_digest;
  return j;
}

ValidationReport ValidationReport::from_json(const nlohmann::json& j) {
  ValidationReport r;
  r.valid = j.at("valid").get<bool>();
  r.kind = kind_from_string(j.at("kind").get<std::string>());
  if (!j.at("step").is_null()) r.step = j.at("step").get<std::size_t>();
  r.action = j.at("action").get<std::string>();
  r.violated = j.at("violated").get<std::string>();
  r.unsatisfied_goals = j.at("unsatisfied_goals").get<std::vector<std::string>>();
  r.state = j.at("state").get<std::vector<std::string>>();
  r.state_digest = j.at("state_digest").get<std::string>();
  return r;
}

ValidationReport validate_plan(const GroundTask& task, std::span<const ActionId> plan) {
  std::vector<std::string> names;
  names.reserve(plan.size());
  for (ActionId id : plan) names.push_back(task.actions.at(id).name());
  return validate_plan(task, task.init, names, task.problem.goal);
}

ValidationReport validate_plan(const GroundTask& task, const State& from,
                               std::span<const std::string> plan, std::span<const Literal> goal) {
  ValidationReport r;
  State s = from;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto id = task.find_action(util::to_lower(plan[i]));
    if (!id) {
      r.valid = false;
      r.kind = FailureKind::unknown_action;
      r.step = i;
      r.action = plan[i];
      r.violated = plan[i];
      snapshot(task, s, r);
      return r;
    }
    const GroundAction& a = task.actions[*id];
    if (auto v = first_violation(task, s, a)) {
      r.valid = false;
      r.kind = FailureKind::precondition;
      r.step = i;
      r.action = a.name();
      r.violated = *v;
      snapshot(task, s, r);
      return r;
    }
    s = s.with(a.add, a.del);
  }
  for (const auto& g : goal) {
    if (!literal_holds(task, s, g)) r.unsatisfied_goals.push_back(g.str());
  }
  if (!r.unsatisfied_goals.empty()) {
    r.valid = false;
    r.kind = FailureKind::goal;
    r.violated = r.unsatisfied_goals.front();
  }
  snapshot(task, s, r);
  return r;
}

ValidationReport validate_plan(const Domain& domain, const Problem& problem,
                               std::span<const std::string> plan) {
  const GroundTask task = ground(domain, problem);
  return validate_plan(task, task.init, plan, task.problem.goal);
}

State execute_prefix(const GroundTask& task, const State& from, std::span<const std::string> plan) {
  State s = from;
  for (const auto& name : plan) {
    auto id = task.find_action(util::to_lower(name));
    if (!id || !applicable(s, task.actions[*id])) break;
    s = s.with(task.actions[*id].add, task.actions[*id].del);
  }
  return s;
}

void write_reports(const std::filesystem::path& path, std::span<const ValidationReport> reports) {
  std::vector<nlohmann::json> records;
  for (const auto& r : reports) records.push_back(r.to_json());
  util::write_jsonl(path, records);
}

std::vector<ValidationReport> read_reports(const std::filesystem::path& path) {
  std::vector<ValidationReport> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(ValidationReport::from_json(j));
  return out;
}

}  // namespace hmap::pddl
