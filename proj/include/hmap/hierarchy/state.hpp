#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmap/planner/planner.hpp"
#include "hmap/promptopt/loss.hpp"
#include "hmap/promptopt/prompt.hpp"
#include "hmap/util/trace.hpp"

namespace hmap::hierarchy {

struct Subtask {
  std::string id;
  std::string text;
  std::string target;  // robot type or robot id
  std::vector<std::string> depends_on;
};

/// PDDL produced by a leaf agent for its robot.
struct SubPlanSpec {
  std::string source;
  std::string domain_text;
  std::string problem_text;
  std::string robot;
};

/// Output of an agent's last backend call, kept until its inputs change.
struct AgentOutput {
  std::string request_digest;
  std::vector<Subtask> subtasks;
  std::optional<SubPlanSpec> spec;
  /// Set when the call failed; the loss class and diagnostic.
  std::optional<promptopt::LossClass> failure;
  promptopt::Diagnostic diagnostic;
};

struct Agent {
  std::string id;  // "E<layer>.<index>"
  int layer = 0;
  std::optional<std::string> parent;
  std::string subtask;               // as given by the parent; the instruction for the root
  std::string target;                // robot type or robot id this agent acts for; empty for the root
  std::vector<std::string> depends_on;  // sibling agent ids
  std::vector<std::string> preceded_by;  // subtask texts that must finish first, inherited
  std::vector<std::string> children;
  std::string task;                  // full text handed to the backend
  promptopt::PromptVersion prompt;
  std::string replanning_prompt;
  bool live = true;
  std::optional<AgentOutput> output;
};

struct Options {
  int layers = 3;
  int k_max = 5;
  bool prompt_opt = true;
  bool sharing = true;
  /// Concurrent backend calls within one layer; 1 runs sequentially.
  std::size_t threads = 1;
  planner::SearchBudget budget;
};

/// Backend calls per agent per iteration at most: one generation call, one
/// escalation decision, one gradient and, per layer, one aggregation plus one
/// meta-gradient. Bounds a run at k_max * agents * kCallsPerAgent.
inline constexpr std::size_t kCallsPerAgent = 5;

struct HierarchyState {
  Options options;
  std::vector<Agent> agents;  // every agent ever created, in creation order
  std::vector<std::string> phi;  // live agents
  std::vector<promptopt::PromptVersion> meta;  // shared meta-prompt per layer
  int k = 0;
  std::vector<int> next_index;  // per-layer id counters
  util::Trace trace;

  Agent& agent(const std::string& id);
  const Agent& agent(const std::string& id) const;
  const Agent& root() const { return agents.front(); }
  /// Live descendants of `id`, depth first.
  std::vector<std::string> descendants(const std::string& id) const;
  /// Removes `id`'s descendants from the live set and marks them dead.
  std::vector<std::string> prune_children(const std::string& id);
  bool in_phi(const std::string& id) const;
  void record_prompt(const promptopt::PromptVersion& p);
};

/// Default prompts.
promptopt::PromptVersion default_prompt(const std::string& owner, int layer, int layers);
promptopt::PromptVersion default_meta(int layer);
std::string default_replanning_prompt(int layer, int layers);

}  // namespace hmap::hierarchy
