#pragma once

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hmap/eval/suite.hpp"
#include "hmap/llm/backend.hpp"
#include "hmap/pddl/task.hpp"
#include "hmap/util/jsonl.hpp"

namespace hmap::testing {

inline std::filesystem::path data_dir() { return std::filesystem::path(HMAP_DATA_DIR); }

inline std::string read_data(const std::string& rel) { return util::read_file(data_dir() / rel); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hmap-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Shortest plan length by plain BFS over string-set states.
inline std::optional<std::size_t> naive_shortest(const pddl::GroundTask& t) {
  using S = std::set<std::string>;
  auto holds = [&](const S& s, pddl::AtomId id) { return s.count(t.atom_str(id)) > 0; };
  auto goal = [&](const S& s) {
    for (pddl::AtomId g : t.goal_pos) if (!holds(s, g)) return false;
    for (pddl::AtomId g : t.goal_neg) if (holds(s, g)) return false;
    return true;
  };
  const auto v = t.describe(t.init);
  S start(v.begin(), v.end());
  std::map<S, std::size_t> dist{{start, 0}};
  std::deque<S> queue{start};
  while (!queue.empty()) {
    S s = queue.front();
    queue.pop_front();
    if (goal(s)) return dist[s];
    for (const auto& a : t.actions) {
      bool ok = true;
      for (pddl::AtomId p : a.pre_pos) ok = ok && holds(s, p);
      for (pddl::AtomId p : a.pre_neg) ok = ok && !holds(s, p);
      if (!ok) continue;
      S n = s;
      for (pddl::AtomId x : a.add) n.insert(t.atom_str(x));
      for (pddl::AtomId x : a.del) n.erase(t.atom_str(x));
      if (dist.emplace(n, dist[s] + 1).second) queue.push_back(n);
    }
  }
  return std::nullopt;
}

/// Runs the independent fold script over report files and parses its output.
inline nlohmann::json fold_with_script(const std::filesystem::path& episodes, const std::filesystem::path& truths,
                                       const std::filesystem::path& out) {
  const std::string cmd = std::string("\"") + HMAP_PYTHON + "\" \"" + HMAP_FOLD_SCRIPT + "\" --episodes \"" +
                          episodes.string() + "\" --truths \"" + truths.string() + "\" > \"" + out.string() + "\"";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("fold script failed: " + cmd);
  return nlohmann::json::parse(util::read_file(out));
}

/// Task cases carrying only what the metrics read.
inline std::vector<eval::TaskCase> cases_from_truths(const nlohmann::json& truths) {
  std::vector<eval::TaskCase> out;
  for (const auto& j : truths) {
    eval::TaskCase c;
    c.id = j.at("id");
    c.category = eval::category_from_string(j.at("category").get<std::string>());
    c.goal = j.at("goal").get<std::vector<std::string>>();
    c.gt_actions = j.at("gt_actions");
    c.gt_makespan = j.at("gt_makespan");
    out.push_back(std::move(c));
  }
  return out;
}

/// Backend answering from a function; keeps every request it saw.
class ScriptedBackend : public llm::Backend {
 public:
  explicit ScriptedBackend(std::function<std::string(const llm::Request&)> fn) : fn_(std::move(fn)) {}
  std::vector<llm::Request> seen;

 protected:
  std::string do_invoke(const llm::Request& r) override {
    seen.push_back(r);
    return fn_(r);
  }

 private:
  std::function<std::string(const llm::Request&)> fn_;
};

}  // namespace hmap::testing
