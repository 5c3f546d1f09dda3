#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hmap/hierarchy/environment.hpp"
#include "hmap/hierarchy/state.hpp"
#include "hmap/llm/backend.hpp"
#include "hmap/multirobot/pop.hpp"
#include "hmap/promptopt/loss.hpp"

namespace hmap::hierarchy {

/// Meta-prompts outlive a single instruction: consecutive runs in one session
/// start from the meta-prompts the previous run ended with.
struct Session {
  Options options;
  std::vector<promptopt::PromptVersion> meta;

  explicit Session(Options opts = {});
};

struct LeafResult {
  std::string agent;
  std::string robot;
  SubPlanSpec spec;
  std::vector<std::string> plan;  // ground action names
};

struct Outcome {
  bool success = false;
  /// Top-down passes run: k + 1 on success, k_max on failure.
  int iterations = 0;
  std::vector<LeafResult> leaves;  // in validation order
  std::optional<multirobot::PartialOrderPlan> plan;
  std::optional<promptopt::TextualLoss> last_failure;
  std::size_t backend_calls = 0;
  HierarchyState state;
};

/// Top-down decomposition, leaf PDDL generation, planning and
/// validation, escalation and prompt updates, bounded by options.k_max.
Outcome orchestrate(const std::string& instruction, const Environment& env, llm::Backend& backend,
                    Session& session);

// Steps of the loop, exposed for tests.

/// Parses and checks a decomposition response for `agent`. Throws
/// llm::SchemaError on bad JSON or an unknown or wrong-kind target.
std::vector<Subtask> parse_subtasks(const std::string& response, const Agent& agent, const Environment& env,
                                    int layers);

/// Parses a pddl.v1 response. Throws llm::SchemaError or pddl::ParseError.
SubPlanSpec parse_spec(const std::string& response, const Agent& agent);

/// Climbs from `source` while the backend answers "parent"; the root is
/// returned without a call. Unrecognized answers count as "parent".
std::string escalate(HierarchyState& state, const std::string& source, const promptopt::TextualLoss& loss,
                     llm::Backend& backend);

/// Text of the request an agent would send now.
llm::Request agent_request(const HierarchyState& state, const Agent& agent);

}  // namespace hmap::hierarchy
