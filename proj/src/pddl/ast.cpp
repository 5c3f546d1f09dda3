#include "hmap/pddl/ast.hpp"

#include <map>
#include <set>

namespace hmap::pddl {

std::string Atom::str() const {
  std::string out = "(" + predicate;
  for (const auto& a : args) out += " " + a;
  out += ")";
  return out;
}

bool Atom::is_ground() const {
  for (const auto& a : args) {
    if (!a.empty() && a.front() == '?') return false;
  }
  return true;
}

std::string Literal::str() const {
  return positive ? atom.str() : "(not " + atom.str() + ")";
}

const ActionSchema* Domain::find_action(std::string_view name) const {
  for (const auto& a : actions) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const PredicateDecl* Domain::find_predicate(std::string_view name) const {
  for (const auto& p : predicates) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool Domain::has_type(std::string_view type) const {
  if (type == kRootType) return true;
  for (const auto& t : types) {
    if (t.name == type) return true;
  }
  return false;
}

bool Domain::is_subtype(std::string_view type, std::string_view ancestor) const {
  if (ancestor == kRootType || type == ancestor) return true;
  std::string cur(type);
  // Bounded walk; check_domain rejects cycles, but a hand-built domain may not
  // have been checked.
  for (std::size_t hops = 0; hops <= types.size(); ++hops) {
    const TypedName* decl = nullptr;
    for (const auto& t : types) {
      if (t.name == cur) {
        decl = &t;
        break;
      }
    }
    if (decl == nullptr) return false;
    if (decl->type == ancestor) return true;
    cur = decl->type;
  }
  return false;
}

namespace {

void check_atom(const Domain& d, const Atom& atom, const std::map<std::string, std::string>& scope,
                const std::string& where) {
  const PredicateDecl* decl = d.find_predicate(atom.predicate);
  if (decl == nullptr) {
    throw ModelError(where + ": undeclared predicate '" + atom.predicate + "'");
  }
  if (decl->params.size() != atom.args.size()) {
    throw ModelError(where + ": predicate '" + atom.predicate + "' expects " +
                     std::to_string(decl->params.size()) + " argument(s), got " +
                     std::to_string(atom.args.size()));
  }
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    auto it = scope.find(atom.args[i]);
    if (it == scope.end()) {
      throw ModelError(where + ": unknown " +
                       std::string(atom.args[i].starts_with('?') ? "parameter" : "object") + " '" +
                       atom.args[i] + "' in " + atom.str());
    }
    // Objects must fit the slot. Parameters may also be declared more
    // generally than the slot.
    const std::string& arg_type = it->second;
    const std::string& slot_type = decl->params[i].type;
    const bool is_param = atom.args[i].starts_with('?');
    if (!d.is_subtype(arg_type, slot_type) && !(is_param && d.is_subtype(slot_type, arg_type))) {
      throw ModelError(where + ": argument '" + atom.args[i] + "' of type " + arg_type +
                       " does not fit " + slot_type + " in " + atom.str());
    }
  }
}

}  // namespace

void check_domain(const Domain& d) {
  std::set<std::string> names;
  for (const auto& t : d.types) {
    if (t.name == kRootType) continue;
    if (!names.insert(t.name).second) throw ModelError("duplicate type '" + t.name + "'");
  }
  for (const auto& t : d.types) {
    if (!d.has_type(t.type)) {
      throw ModelError("type '" + t.name + "' has undeclared parent '" + t.type + "'");
    }
    // Walk up; more hops than declared types means a cycle.
    std::string cur = t.name;
    std::size_t hops = 0;
    while (cur != kRootType) {
      if (++hops > d.types.size() + 1) throw ModelError("cyclic type hierarchy at '" + t.name + "'");
      const TypedName* decl = nullptr;
      for (const auto& u : d.types) {
        if (u.name == cur) decl = &u;
      }
      if (decl == nullptr) break;
      cur = decl->type;
    }
  }

  std::set<std::string> preds;
  for (const auto& p : d.predicates) {
    if (!preds.insert(p.name).second) throw ModelError("duplicate predicate '" + p.name + "'");
    for (const auto& param : p.params) {
      if (!d.has_type(param.type)) {
        throw ModelError("predicate '" + p.name + "' uses undeclared type '" + param.type + "'");
      }
    }
  }

  std::map<std::string, std::string> constants;
  for (const auto& c : d.constants) {
    if (!d.has_type(c.type)) {
      throw ModelError("constant '" + c.name + "' has undeclared type '" + c.type + "'");
    }
    if (!constants.emplace(c.name, c.type).second) {
      throw ModelError("duplicate constant '" + c.name + "'");
    }
  }

  std::set<std::string> actions;
  for (const auto& a : d.actions) {
    const std::string where = "action '" + a.name + "'";
    if (!actions.insert(a.name).second) throw ModelError("duplicate " + where);
    std::map<std::string, std::string> scope = constants;
    std::set<std::string> params;
    for (const auto& p : a.params) {
      if (!params.insert(p.name).second) {
        throw ModelError(where + ": duplicate parameter '" + p.name + "'");
      }
      if (!d.has_type(p.type)) {
        throw ModelError(where + ": parameter '" + p.name + "' has undeclared type '" + p.type + "'");
      }
      scope[p.name] = p.type;
    }
    for (const auto& l : a.pre) check_atom(d, l.atom, scope, where);
    for (const auto& l : a.eff) check_atom(d, l.atom, scope, where);
    for (const auto& e : a.eff) {
      if (!e.positive) continue;
      for (const auto& f : a.eff) {
        if (!f.positive && f.atom == e.atom) {
          throw ModelError(where + ": " + e.atom.str() + " appears both positively and negatively in the effect");
        }
      }
    }
  }
}

std::vector<TypedName> all_objects(const Domain& domain, const Problem& problem) {
  std::vector<TypedName> out = domain.constants;
  out.insert(out.end(), problem.objects.begin(), problem.objects.end());
  return out;
}

void check_problem(const Domain& d, const Problem& p) {
  if (!p.domain_name.empty() && p.domain_name != d.name) {
    throw ModelError("problem '" + p.name + "' targets domain '" + p.domain_name + "', not '" + d.name + "'");
  }
  std::map<std::string, std::string> scope;
  for (const auto& o : all_objects(d, p)) {
    if (!d.has_type(o.type)) {
      throw ModelError("object '" + o.name + "' has undeclared type '" + o.type + "'");
    }
    if (!scope.emplace(o.name, o.type).second) throw ModelError("duplicate object '" + o.name + "'");
  }
  for (const auto& a : p.init) check_atom(d, a, scope, "init");
  for (const auto& l : p.goal) check_atom(d, l.atom, scope, "goal");
}

}  // namespace hmap::pddl
