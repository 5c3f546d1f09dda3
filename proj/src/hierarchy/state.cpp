#include "hmap/hierarchy/state.hpp"

#include <algorithm>
#include <stdexcept>

namespace hmap::hierarchy {

Agent& HierarchyState::agent(const std::string& id) {
  for (auto& a : agents) {
    if (a.id == id) return a;
  }
  throw std::out_of_range("unknown agent " + id);
}

const Agent& HierarchyState::agent(const std::string& id) const {
  return const_cast<HierarchyState*>(this)->agent(id);
}

std::vector<std::string> HierarchyState::descendants(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& c : agent(id).children) {
    if (!agent(c).live) continue;
    out.push_back(c);
    const auto sub = descendants(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<std::string> HierarchyState::prune_children(const std::string& id) {
  const auto gone = descendants(id);
  for (const auto& d : gone) {
    agent(d).live = false;
    phi.erase(std::remove(phi.begin(), phi.end(), d), phi.end());
  }
  agent(id).children.clear();
  return gone;
}

bool HierarchyState::in_phi(const std::string& id) const {
  return std::find(phi.begin(), phi.end(), id) != phi.end();
}

void HierarchyState::record_prompt(const promptopt::PromptVersion& p) {
  auto j = p.to_json();
  j["iteration"] = k;
  trace.add("prompt", j);
}

promptopt::PromptVersion default_prompt(const std::string& owner, int layer, int layers) {
  promptopt::PromptVersion p;
  p.owner = owner;
  if (layer == 0) {
    p.body.base = layers == 2
                      ? "Summarize the user's instruction and decompose it into high-level subtasks for robots."
                      : "Summarize the user's instruction and decompose it into high-level subtasks for robot types.";
  } else if (layer < layers - 1) {
    p.body.base = "Decompose into subtasks as needed and assign them to robots.";
  } else {
    p.body.base = "Generate a PDDL domain and problem for the assigned subtask.";
  }
  return p;
}

promptopt::PromptVersion default_meta(int layer) {
  promptopt::PromptVersion p;
  p.owner = "meta/" + std::to_string(layer);
  p.body.base = "Shared guidance for layer " + std::to_string(layer) + ".";
  return p;
}

std::string default_replanning_prompt(int layer, int layers) {
  std::string s =
      "A plan built from your output failed validation. Answer \"self\" if revising your own output can fix the "
      "failure, or \"parent\" if the agent that assigned your subtask must revise it.";
  if (layer == layers - 1) s += " You wrote the PDDL for a single robot.";
  return s;
}

}  // namespace hmap::hierarchy
