#include "hmap/pddl/task.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace hmap::pddl {

AtomId AtomTable::intern(const Atom& atom) {
  const std::string key = atom.str();
  auto [it, inserted] = index_.emplace(key, static_cast<AtomId>(atoms_.size()));
  if (inserted) atoms_.push_back(atom);
  return it->second;
}

std::optional<AtomId> AtomTable::find(const Atom& atom) const {
  auto it = index_.find(atom.str());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

State::State(std::vector<AtomId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool State::contains(AtomId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

State State::with(std::span<const AtomId> add, std::span<const AtomId> del) const {
  std::vector<AtomId> out = ids_;
  out.insert(out.end(), add.begin(), add.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (!del.empty()) {
    std::vector<AtomId> d(del.begin(), del.end());
    std::sort(d.begin(), d.end());
    std::vector<AtomId> kept;
    kept.reserve(out.size());
    std::set_difference(out.begin(), out.end(), d.begin(), d.end(), std::back_inserter(kept));
    out = std::move(kept);
  }
  State s;
  s.ids_ = std::move(out);
  return s;
}

std::size_t StateHash::operator()(const State& s) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (AtomId id : s.ids()) {
    h ^= id + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::string GroundAction::name() const {
  std::string out = "(" + schema;
  for (const auto& a : args) out += " " + a;
  out += ")";
  return out;
}

std::optional<ActionId> GroundTask::find_action(std::string_view name) const {
  auto it = by_name.find(std::string(name));
  if (it == by_name.end()) return std::nullopt;
  return it->second;
}

bool GroundTask::satisfies_goal(const State& s) const {
  for (AtomId g : goal_pos) {
    if (!s.contains(g)) return false;
  }
  for (AtomId g : goal_neg) {
    if (s.contains(g)) return false;
  }
  return true;
}

std::vector<std::string> GroundTask::describe(const State& s) const {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (AtomId id : s.ids()) out.push_back(atom_str(id));
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::pair<AtomId, bool>> GroundTask::lookup(const Literal& lit) const {
  auto id = atoms.find(lit.atom);
  if (!id) return std::nullopt;
  return std::make_pair(*id, lit.positive);
}

namespace {

std::vector<std::vector<std::string>> candidates(const Domain& d, const std::vector<TypedName>& objects,
                                                 const ActionSchema& a) {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : a.params) {
    std::vector<std::string> c;
    for (const auto& o : objects) {
      if (d.is_subtype(o.type, p.type)) c.push_back(o.name);
    }
    out.push_back(std::move(c));
  }
  return out;
}

Atom substitute(const Atom& a, const std::map<std::string, std::string>& binding) {
  Atom g{a.predicate, {}};
  g.args.reserve(a.args.size());
  for (const auto& arg : a.args) {
    auto it = binding.find(arg);
    g.args.push_back(it == binding.end() ? arg : it->second);
  }
  return g;
}

std::vector<AtomId> sorted_unique(std::vector<AtomId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::size_t count_groundings(const Domain& domain, const Problem& problem) {
  const auto objects = all_objects(domain, problem);
  std::size_t total = 0;
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  for (const auto& a : domain.actions) {
    std::size_t n = 1;
    for (const auto& c : candidates(domain, objects, a)) {
      if (c.empty()) {
        n = 0;
        break;
      }
      n = (n > kMax / c.size()) ? kMax : n * c.size();
    }
    total = (total > kMax - n) ? kMax : total + n;
  }
  return total;
}

GroundTask ground(const Domain& domain, const Problem& problem, const GroundingOptions& options) {
  const std::size_t count = count_groundings(domain, problem);
  if (count > options.max_actions) {
    throw GroundingError("grounding would produce " + std::to_string(count) +
                         " actions, above the cap of " + std::to_string(options.max_actions));
  }
  GroundTask task;
  task.domain = domain;
  task.problem = problem;
  task.actions.reserve(count);

  std::vector<AtomId> init_ids;
  for (const auto& a : problem.init) init_ids.push_back(task.atoms.intern(a));
  task.init = State(std::move(init_ids));
  for (const auto& g : problem.goal) {
    (g.positive ? task.goal_pos : task.goal_neg).push_back(task.atoms.intern(g.atom));
  }
  task.goal_pos = sorted_unique(task.goal_pos);
  task.goal_neg = sorted_unique(task.goal_neg);

  const auto objects = all_objects(domain, problem);
  const bool has_robot_type = domain.has_type(options.robot_type) && options.robot_type != kRootType;
  for (std::size_t si = 0; si < domain.actions.size(); ++si) {
    const ActionSchema& schema = domain.actions[si];
    const auto cands = candidates(domain, objects, schema);
    bool empty = false;
    for (const auto& c : cands) empty = empty || c.empty();
    if (empty) continue;

    std::vector<std::size_t> idx(cands.size(), 0);
    while (true) {
      GroundAction ga;
      ga.schema_index = si;
      ga.schema = schema.name;
      std::map<std::string, std::string> binding;
      for (std::size_t p = 0; p < cands.size(); ++p) {
        const std::string& obj = cands[p][idx[p]];
        binding[schema.params[p].name] = obj;
        ga.args.push_back(obj);
        if (ga.robot.empty() && has_robot_type && domain.is_subtype(schema.params[p].type, options.robot_type)) {
          ga.robot = obj;
        }
      }
      for (const auto& l : schema.pre) {
        (l.positive ? ga.pre_pos : ga.pre_neg).push_back(task.atoms.intern(substitute(l.atom, binding)));
      }
      for (const auto& l : schema.eff) {
        (l.positive ? ga.add : ga.del).push_back(task.atoms.intern(substitute(l.atom, binding)));
      }
      ga.pre_pos = sorted_unique(std::move(ga.pre_pos));
      ga.pre_neg = sorted_unique(std::move(ga.pre_neg));
      ga.add = sorted_unique(std::move(ga.add));
      ga.del = sorted_unique(std::move(ga.del));
      task.actions.push_back(std::move(ga));

      // Odometer over parameter candidates, last parameter fastest.
      bool done = true;
      for (std::size_t p = cands.size(); p-- > 0;) {
        if (++idx[p] < cands[p].size()) {
          done = false;
          break;
        }
        idx[p] = 0;
      }
      if (done) break;
    }
  }
  for (ActionId i = 0; i < task.actions.size(); ++i) task.by_name.emplace(task.actions[i].name(), i);
  return task;
}

bool applicable(const State& s, const GroundAction& a) {
  for (AtomId p : a.pre_pos) {
    if (!s.contains(p)) return false;
  }
  for (AtomId p : a.pre_neg) {
    if (s.contains(p)) return false;
  }
  return true;
}

InapplicableActionError::InapplicableActionError(const std::string& action, const std::string& violated)
    : std::runtime_error(action + " is not applicable: precondition " + violated + " does not hold"),
      violated_(violated) {}

std::optional<std::string> first_violation(const GroundTask& task, const State& s, const GroundAction& a) {
  // Report in schema order so the message follows the operator definition.
  const ActionSchema& schema = task.domain.actions.at(a.schema_index);
  std::map<std::string, std::string> binding;
  for (std::size_t i = 0; i < schema.params.size(); ++i) binding[schema.params[i].name] = a.args[i];
  for (const auto& l : schema.pre) {
    const Atom g = substitute(l.atom, binding);
    auto id = task.atoms.find(g);
    const bool holds = id && s.contains(*id);
    if (holds != l.positive) return Literal{g, l.positive}.str();
  }
  return std::nullopt;
}

State apply(const GroundTask& task, const State& s, const GroundAction& a) {
  if (!applicable(s, a)) {
    throw InapplicableActionError(a.name(), first_violation(task, s, a).value_or("?"));
  }
  return s.with(a.add, a.del);
}

}  // namespace hmap::pddl
