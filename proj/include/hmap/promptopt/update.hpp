#pragma once

#include <map>
#include <string>

#include "hmap/hierarchy/state.hpp"
#include "hmap/llm/backend.hpp"
#include "hmap/promptopt/loss.hpp"

namespace hmap::promptopt {

/// Prompt update on `state`, with `losses` keyed by the agent they are
/// attributed to. Prunes the children of every such agent, steps each agent
/// prompt on its loss, re-renders the loss against the new prompt, then steps
/// each layer's meta-prompt on the aggregated post-update losses. Meta updates
/// are skipped when sharing is off. Runs on a copy: on any exception `state`
/// is left unchanged.
void prompt_update(hierarchy::HierarchyState& state, const std::map<std::string, TextualLoss>& losses,
                   llm::Backend& backend);

}  // namespace hmap::promptopt
