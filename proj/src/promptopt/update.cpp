#include "hmap/promptopt/update.hpp"

namespace hmap::promptopt {

void prompt_update(hierarchy::HierarchyState& state, const std::map<std::string, TextualLoss>& losses,
                   llm::Backend& backend) {
  hierarchy::HierarchyState next = state;
  const int layers = next.options.layers;

  for (const auto& [id, loss] : losses) {
    const auto gone = next.prune_children(id);
    if (!gone.empty()) next.trace.add("prune", {{"agent", id}, {"removed", gone}});
    next.agent(id).output.reset();
  }
  if (!next.options.prompt_opt) {
    state = std::move(next);
    return;
  }

  std::map<int, std::vector<TextualLoss>> post_by_layer;
  for (const auto& id : next.phi) {
    auto it = losses.find(id);
    if (it == losses.end()) continue;
    hierarchy::Agent& a = next.agent(id);
    const TextualLoss pre = rerender(it->second, a.prompt);
    next.trace.add("loss", {{"stage", "pre"}, {"loss", pre.to_json()}});
    const TextualGradient g = grad(a.prompt, pre, backend);
    next.trace.add("gradient", {{"owner", id}, {"edits", g.to_json()}});
    a.prompt = tgd_step(a.prompt, g);
    next.record_prompt(a.prompt);
    post_by_layer[a.layer].push_back(rerender(pre, a.prompt));
  }
  // Post-losses are rendered only after every agent step above.
  for (const auto& [layer, post] : post_by_layer) {
    for (const auto& l : post) next.trace.add("loss", {{"stage", "post"}, {"loss", l.to_json()}});
  }

  if (next.options.sharing) {
    for (int l = 1; l < layers; ++l) {
      const auto it = post_by_layer.find(l);
      if (it == post_by_layer.end()) continue;
      const LayerLoss ll = aggregate(l, it->second, backend);
      if (ll.empty()) continue;
      next.trace.add("layer-loss", ll.to_json());
      const TextualGradient g = meta_grad(next.meta[l], ll, backend);
      next.trace.add("gradient", {{"owner", next.meta[l].owner}, {"edits", g.to_json()}});
      next.meta[l] = tgd_step(next.meta[l], g);
      next.record_prompt(next.meta[l]);
    }
  }
  state = std::move(next);
}

}  // namespace hmap::promptopt
