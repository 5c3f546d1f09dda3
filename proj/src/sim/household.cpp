#include "hmap/sim/household.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>

#include <json.hpp>

#include "hmap/pddl/parser.hpp"
#include "hmap/util/text.hpp"

namespace hmap::sim {

using nlohmann::json;

namespace {

struct World {
  std::string head;  // first line: "Instruction: ..." or "Subtask: ..."
  std::string assign;
  std::vector<std::string> preceded;
  std::vector<std::string> robots;
  std::map<std::string, std::string> type_of;
  std::map<std::string, std::set<std::string>> skills_of;
  std::vector<std::pair<std::string, std::string>> objects;  // name, type
  std::set<std::string> state;
  std::string domain_text;

  bool has_object(const std::string& name) const {
    return std::any_of(objects.begin(), objects.end(), [&](const auto& o) { return o.first == name; });
  }
  std::string type_of_object(const std::string& name) const {
    for (const auto& [n, t] : objects) {
      if (n == name) return t;
    }
    return "";
  }
  std::vector<std::string> objects_of_type(const std::string& type) const {
    std::vector<std::string> out;
    for (const auto& [n, t] : objects) {
      if (t == type) out.push_back(n);
    }
    return out;
  }
};

std::string after(const std::string& line, const std::string& prefix) { return util::trim(line.substr(prefix.size())); }

World read_world(const std::string& task) {
  World w;
  const auto lines = util::split_lines(task);
  std::string section;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (i == 0) {
      w.head = line;
      continue;
    }
    if (util::starts_with(line, "Assign to:") || util::starts_with(line, "Generate PDDL for:")) {
      w.assign = line;
    } else if (util::starts_with(line, "Preceded by:")) {
      std::string rest = after(line, "Preceded by:");
      std::size_t start = 0;
      while (start <= rest.size()) {
        auto end = rest.find("; ", start);
        if (end == std::string::npos) end = rest.size();
        w.preceded.push_back(rest.substr(start, end - start));
        start = end + 2;
      }
    } else if (line == "Robots:" || line == "Objects:" || line == "State:") {
      section = line;
    } else if (line == "Domain:") {
      for (std::size_t j = i + 1; j < lines.size(); ++j) w.domain_text += lines[j] + "\n";
      break;
    } else if (section == "Robots:" && util::starts_with(line, "  ")) {
      // "  robot0 (manipulator): move pickup"
      const auto words = util::split_words(line);
      const std::string robot = words.at(0);
      const std::string type = words.at(1).substr(1, words.at(1).size() - 3);
      w.robots.push_back(robot);
      w.type_of[robot] = type;
      w.skills_of[robot] = {words.begin() + 2, words.end()};
    } else if (section == "Objects:" && util::starts_with(line, "  ")) {
      const auto words = util::split_words(line);
      w.objects.emplace_back(words.at(0), words.at(2));
    } else if (section == "State:" && util::starts_with(line, "  ")) {
      w.state.insert(util::trim(line));
    }
  }
  return w;
}

std::string head_text(const World& w) {
  const auto colon = w.head.find(':');
  return util::trim(w.head.substr(colon + 1));
}

std::string strip_article(const std::string& s) { return util::starts_with(s, "the ") ? s.substr(4) : s; }

// Phrase -> object name, falling back to the phrase itself (a hallucinated object).
std::string resolve(const World& w, const std::string& phrase) {
  std::string p = strip_article(util::trim(phrase));
  std::string dashed = p;
  std::replace(dashed.begin(), dashed.end(), ' ', '-');
  if (w.has_object(dashed)) return dashed;
  const auto words = util::split_words(p);
  if (!words.empty() && w.has_object(words.back())) return words.back();
  return dashed;
}

struct Clause {
  std::string text;
  bool after_previous = false;  // joined to the previous clause by "then"
};

std::vector<Clause> split_clauses(const std::string& text) {
  std::vector<Clause> out;
  static const std::regex sep(R"((,\s*and then\s+|,\s*then\s+|\s+and then\s+|\s+then\s+|,\s*and\s+|\s+and\s+|,\s+))");
  std::sregex_iterator it(text.begin(), text.end(), sep), end;
  std::size_t pos = 0;
  bool then = false;
  for (; it != end; ++it) {
    out.push_back({util::trim(text.substr(pos, it->position() - pos)), then});
    then = it->str().find("then") != std::string::npos;
    pos = it->position() + it->length();
  }
  out.push_back({util::trim(text.substr(pos)), then});
  out.erase(std::remove_if(out.begin(), out.end(), [](const Clause& c) { return c.text.empty(); }), out.end());
  return out;
}

std::string join_clauses(const std::vector<Clause>& cs) {
  std::string out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i > 0) out += cs[i].after_previous ? ", then " : " and ";
    out += cs[i].text;
  }
  return out;
}

std::set<std::string> skills_needed(const std::string& clause) {
  if (util::starts_with(clause, "put ")) return {"pickup", "put"};
  if (util::starts_with(clause, "place ")) return {"pickup", "place"};
  if (util::starts_with(clause, "wash ")) return {"pickup", "wash"};
  if (util::starts_with(clause, "open ")) return {"open"};
  if (util::starts_with(clause, "turn off ")) return {"toggle-off"};
  if (util::starts_with(clause, "turn on ")) return {"toggle-on"};
  return {};
}

bool can_do(const World& w, const std::string& robot, const std::string& clause) {
  const auto need = skills_needed(clause);
  const auto& have = w.skills_of.at(robot);
  return std::all_of(need.begin(), need.end(), [&](const std::string& s) { return have.count(s) > 0; });
}

struct PutInto {
  std::string item;
  std::string receptacle;
};

std::optional<PutInto> match_put(const World& w, const std::string& clause) {
  static const std::regex re(R"(put (.+) in(?:to)? (.+))");
  std::smatch m;
  if (!std::regex_match(clause, m, re)) return std::nullopt;
  return PutInto{resolve(w, m[1]), resolve(w, m[2])};
}

json subtask(const std::string& id, const std::string& text, const std::string& target,
             const std::vector<std::string>& deps) {
  return {{"id", id}, {"text", text}, {"target", target}, {"depends_on", deps}};
}

// --- leaf PDDL ---------------------------------------------------------------

struct Goal {
  std::vector<std::string> pos;
  std::vector<std::string> neg;
};

Goal clause_goal(const World& w, const std::string& text) {
  std::smatch m;
  Goal g;
  static const std::regex put(R"(put (.+) in(?:to)? (.+))");
  static const std::regex place(R"(place (.+) on (.+))");
  static const std::regex open(R"(open (.+))");
  static const std::regex off(R"(turn off (.+))");
  static const std::regex on(R"(turn on (.+))");
  static const std::regex wash(R"(wash (.+))");
  if (std::regex_match(text, m, put)) {
    g.pos.push_back("(in " + resolve(w, m[1]) + " " + resolve(w, m[2]) + ")");
  } else if (std::regex_match(text, m, place)) {
    g.pos.push_back("(at " + resolve(w, m[1]) + " " + resolve(w, m[2]) + ")");
  } else if (std::regex_match(text, m, open)) {
    g.pos.push_back("(opened " + resolve(w, m[1]) + ")");
  } else if (std::regex_match(text, m, off)) {
    g.neg.push_back("(light-on " + resolve(w, m[1]) + ")");
  } else if (std::regex_match(text, m, on)) {
    g.pos.push_back("(light-on " + resolve(w, m[1]) + ")");
  } else if (std::regex_match(text, m, wash)) {
    g.pos.push_back("(washed " + resolve(w, m[1]) + ")");
  }
  return g;
}

Goal goal_of(const World& w, const std::string& text) {
  Goal g;
  std::string last_opened;
  for (const auto& c : split_clauses(text)) {
    if (util::starts_with(c.text, "move to a non-blocking waypoint")) {
      if (!last_opened.empty()) g.neg.push_back("(doorway-blocked " + last_opened + ")");
      continue;
    }
    const Goal one = clause_goal(w, c.text);
    g.pos.insert(g.pos.end(), one.pos.begin(), one.pos.end());
    g.neg.insert(g.neg.end(), one.neg.begin(), one.neg.end());
    if (util::starts_with(c.text, "open ") && !one.pos.empty()) {
      last_opened = one.pos.back().substr(8, one.pos.back().size() - 9);
    }
  }
  return g;
}

bool mentions_other_robot(const World& w, const std::string& atom, const std::string& self) {
  const auto words = util::split_words(atom.substr(1, atom.size() - 2));
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (words[i] != self && w.type_of.count(words[i])) return true;
  }
  return false;
}

std::string problem_text(const World& w, const std::string& robot, const std::string& subtask,
                         const std::vector<std::pair<std::string, std::string>>& extra_objects,
                         const std::set<std::string>& init, const Goal& goal) {
  std::string out = "(define (problem " + robot + "-task)\n  (:domain household)\n  (:objects";
  for (const auto& [n, t] : w.objects) {
    if (w.type_of.count(n) && n != robot) continue;
    out += "\n    " + n + " - " + t;
  }
  for (const auto& [n, t] : extra_objects) out += "\n    " + n + " - " + t;
  out += ")\n  (:init";
  for (const auto& a : init) out += "\n    " + a;
  out += ")\n  (:goal (and";
  for (const auto& a : goal.pos) out += " " + a;
  for (const auto& a : goal.neg) out += " (not " + a + ")";
  out += ")))\n";
  (void)subtask;
  return out;
}

std::string lower(const std::string& s) { return util::to_lower(s); }

}  // namespace

HouseholdBackend::HouseholdBackend()
    : lexicon_{{"it is too bright in here", "turn off the room light"},
               {"it is too dark in here", "turn on the room light"},
               {"i would like a clean apple", "wash the apple"},
               {"keep the tomato somewhere cold", "put the tomato in the freezer"},
               {"tidy up the apple", "place the apple on the table"},
               {"the bread goes in the cupboard", "put the bread in the cabinet"}} {}

std::string HouseholdBackend::do_invoke(const llm::Request& request) {
  switch (request.role) {
    case llm::Role::decompose: return decompose(request);
    case llm::Role::generate_pddl: return generate(request);
    case llm::Role::decide: return decide(request);
    case llm::Role::grad: return gradient(request);
    case llm::Role::aggregate: return aggregate(request);
  }
  return "{}";
}

std::string HouseholdBackend::decompose(const llm::Request& request) const {
  const World w = read_world(request.task);
  std::string text = lower(head_text(w));
  while (!text.empty() && (text.back() == '.' || text.back() == '!')) text.pop_back();
  if (util::starts_with(w.head, "Instruction:")) {
    for (const auto& [from, to] : lexicon_) {
      for (auto p = text.find(from); p != std::string::npos; p = text.find(from, p + to.size())) {
        text.replace(p, from.size(), to);
      }
    }
  }
  const auto clauses = split_clauses(text);
  json list = json::array();

  if (util::starts_with(w.assign, "Assign to: robot types")) {
    // One subtask per robot type, keeping the order types first appear in.
    std::vector<std::string> types;
    std::map<std::string, std::vector<Clause>> by_type;
    std::vector<std::string> type_of_clause;
    const std::string listed = after(w.assign, "Assign to: robot types");
    for (const auto& c : clauses) {
      std::string chosen;
      for (const auto& t : util::split_words(std::regex_replace(listed, std::regex(","), " "))) {
        const auto robots_of_t = [&] {
          std::vector<std::string> rs;
          for (const auto& r : w.robots) {
            if (w.type_of.at(r) == t) rs.push_back(r);
          }
          return rs;
        }();
        if (!robots_of_t.empty() && can_do(w, robots_of_t.front(), c.text)) {
          chosen = t;
          break;
        }
      }
      if (chosen.empty()) chosen = w.type_of.at(w.robots.front());
      if (!by_type.count(chosen)) types.push_back(chosen);
      Clause kept = c;
      if (!by_type[chosen].empty() && !type_of_clause.empty() && type_of_clause.back() != chosen) kept.after_previous = false;
      by_type[chosen].push_back(kept);
      type_of_clause.push_back(chosen);
    }
    std::map<std::string, std::set<std::string>> deps;
    for (std::size_t i = 1; i < clauses.size(); ++i) {
      if (clauses[i].after_previous && type_of_clause[i] != type_of_clause[i - 1]) {
        deps[type_of_clause[i]].insert(type_of_clause[i - 1]);
      }
    }
    std::map<std::string, std::string> id_of;
    for (std::size_t i = 0; i < types.size(); ++i) id_of[types[i]] = "s" + std::to_string(i);
    for (const auto& t : types) {
      std::vector<std::string> d;
      for (const auto& before : deps[t]) {
        // Keep only edges that point backwards in first-appearance order.
        if (id_of.at(before) < id_of.at(t)) d.push_back(id_of.at(before));
      }
      list.push_back(subtask(id_of.at(t), join_clauses(by_type[t]), t, d));
    }
    return json{{"subtasks", list}}.dump();
  }

  // Assign to robots: clauses round robin over capable robots, one subtask per robot.
  const std::string guidance = lower(request.prompt + "\n" + request.meta_prompt);
  const bool egress_aware = util::contains(guidance, "non-blocking waypoint");
  std::vector<std::string> robots;
  for (const auto& r : w.robots) {
    if (util::contains(w.assign, " " + r + " (")) robots.push_back(r);
  }
  if (robots.empty()) robots = w.robots;
  std::size_t next = 0;
  auto pick = [&](const std::string& clause) {
    for (std::size_t tries = 0; tries < robots.size(); ++tries) {
      const std::string r = robots[(next + tries) % robots.size()];
      if (can_do(w, r, clause)) {
        next = (next + tries + 1) % robots.size();
        return r;
      }
    }
    return robots[next++ % robots.size()];
  };

  struct Group {
    std::string robot;
    std::vector<Clause> clauses;
    std::set<std::size_t> deps;
  };
  std::vector<Group> groups;
  auto group_for = [&](const std::string& robot) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].robot == robot) return i;
    }
    groups.push_back({robot, {}, {}});
    return groups.size() - 1;
  };
  std::function<bool(std::size_t, std::size_t)> reaches = [&](std::size_t from, std::size_t to) {
    if (from == to) return true;
    return std::any_of(groups[from].deps.begin(), groups[from].deps.end(),
                       [&](std::size_t d) { return reaches(d, to); });
  };
  auto depend = [&](std::size_t g, std::size_t on) {
    if (!reaches(on, g)) groups[g].deps.insert(on);
  };

  std::optional<std::size_t> previous;
  for (const auto& c : clauses) {
    const std::size_t g = group_for(pick(c.text));
    Clause kept = c;
    if (groups[g].clauses.empty() || previous != g) kept.after_previous = false;
    if (c.after_previous && previous) depend(g, *previous);
    groups[g].clauses.push_back(kept);

    const auto put = match_put(w, c.text);
    const bool openable = put && w.state.count("(openable " + put->receptacle + ")") &&
                          !w.state.count("(opened " + put->receptacle + ")");
    const bool open_aware = put && (util::contains(guidance, "insert open before any put") ||
                                    util::contains(guidance, "open the " + put->receptacle));
    if (openable && open_aware) {
      std::string open_text = "open the " + put->receptacle;
      if (egress_aware && !w.objects_of_type("waypoint").empty()) {
        open_text += ", then move to a non-blocking waypoint to clear the doorway";
      }
      const std::size_t o = group_for(pick("open the " + put->receptacle));
      if (o == g) {
        auto& cs = groups[g].clauses;
        cs.insert(cs.end() - 1, Clause{open_text, false});
        cs.back().after_previous = true;
      } else {
        groups[o].clauses.push_back({open_text, false});
        depend(g, o);
      }
    }
    previous = g;
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    std::vector<std::string> d;
    for (const auto dep : groups[i].deps) d.push_back("s" + std::to_string(dep));
    list.push_back(subtask("s" + std::to_string(i), join_clauses(groups[i].clauses), groups[i].robot, d));
  }
  return json{{"subtasks", list}}.dump();
}

std::string HouseholdBackend::generate(const llm::Request& request) const {
  const World w = read_world(request.task);
  const std::string text = lower(head_text(w));
  const auto words = util::split_words(after(w.assign, "Generate PDDL for:"));
  const std::string robot = words.empty() ? "" : words.front();

  pddl::Domain d = pddl::parse_domain(w.domain_text);
  const auto skills = w.skills_of.count(robot) ? w.skills_of.at(robot) : std::set<std::string>{};
  std::erase_if(d.actions, [&](const pddl::ActionSchema& a) { return !skills.count(a.name); });

  std::set<std::string> init;
  for (const auto& a : w.state) {
    if (!mentions_other_robot(w, a, robot)) init.insert(a);
  }
  for (const auto& p : w.preceded) {
    const Goal g = goal_of(w, lower(p));
    for (const auto& a : g.pos) init.insert(a);
    for (const auto& a : g.neg) init.erase(a);
  }
  const Goal goal = goal_of(w, text);

  std::vector<std::pair<std::string, std::string>> extra;
  for (const auto& a : goal.pos) {
    const auto parts = util::split_words(a.substr(1, a.size() - 2));
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (!w.has_object(parts[i]) && std::none_of(extra.begin(), extra.end(), [&](auto& e) { return e.first == parts[i]; })) {
        extra.emplace_back(parts[i], parts[0] == "in" && i == 2 ? "receptacle" : "item");
      }
    }
  }
  // An unprimed model takes receptacles it puts into to be open.
  const std::string guidance = lower(request.prompt + "\n" + request.meta_prompt);
  for (const auto& c : split_clauses(text)) {
    const auto put = match_put(w, c.text);
    if (!put) continue;
    const std::string opened = "(opened " + put->receptacle + ")";
    const bool aware = util::contains(guidance, "insert open before any put") ||
                       util::contains(guidance, "open the " + put->receptacle);
    if (aware || std::count(goal.pos.begin(), goal.pos.end(), opened)) continue;
    init.insert(opened);
    if (!w.has_object(put->receptacle)) init.insert("(openable " + put->receptacle + ")");
  }
  d.name = "household";
  return json{{"domain", pddl::serialize(d)}, {"problem", problem_text(w, robot, text, extra, init, goal)}}.dump();
}

std::string HouseholdBackend::decide(const llm::Request& request) const {
  static const std::regex layer_re(R"(\(layer (\d+) of (\d+)\))");
  std::smatch m;
  if (!std::regex_search(request.task, m, layer_re)) return R"({"decision":"parent"})";
  const int layer = std::stoi(m[1]);
  const int layers = std::stoi(m[2]);
  if (layer < layers - 1) return R"({"decision":"self"})";
  const std::string t = request.task;
  const bool own = util::contains(t, "Failure class: parse") || util::contains(t, "Failure class: malformed-response") ||
                   util::contains(t, "Failure class: unsolvable") || util::contains(t, "Failure class: budget") ||
                   util::contains(t, "unknown object");
  return own ? R"({"decision":"self"})" : R"({"decision":"parent"})";
}

std::string HouseholdBackend::gradient(const llm::Request& request) const {
  const std::string& t = request.task;
  std::smatch m;
  std::string payload;
  static const std::regex objective(R"(Layer objective: (.+))");
  static const std::regex closed(R"(\(put \S+ (\S+) (\S+)\) cannot be executed: precondition \(opened (\S+)\))");
  static const std::regex blocked(R"(precondition \(not \(doorway-blocked (\S+)\)\))");
  if (std::regex_search(t, m, objective)) {
    payload = util::trim(m[1].str());
  } else if (std::regex_search(t, m, closed)) {
    payload = "before putting the " + m[1].str() + " into the " + m[2].str() + ", it is necessary to open the " +
              m[3].str() + ".";
  } else if (std::regex_search(t, m, blocked)) {
    payload = "after opening the " + m[1].str() + ", move to a non-blocking waypoint to clear the doorway.";
  } else if (util::contains(t, "unknown object")) {
    payload = "use only objects listed in the environment description.";
  } else if (util::contains(t, "Failure class: parse")) {
    payload = "write syntactically valid PDDL using only the listed predicates.";
  } else {
    payload = "check that every precondition holds in the current state before each action.";
  }
  return json{{"edits", {{{"kind", "append-hint"}, {"payload", payload}, {"rank", 1}}}}}.dump();
}

std::string HouseholdBackend::aggregate(const llm::Request& request) const {
  const std::string& t = request.task;
  std::string objective;
  if (util::contains(t, "precondition (opened ")) {
    objective = "for any subtask that places into a receptacle with open/close affordance, insert Open before any Put.";
  } else if (util::contains(t, "doorway-blocked")) {
    objective = "append an egress action to a non-blocking waypoint to clear the doorway.";
  } else if (util::contains(t, "unknown object")) {
    objective = "use only objects that appear in the environment description.";
  } else {
    objective = "check that every precondition holds in the current state before each action.";
  }
  return json{{"objective", objective},
              {"candidates", {{{"kind", "append-hint"}, {"payload", objective}, {"rank", 1}}}}}
      .dump();
}

}  // namespace hmap::sim
