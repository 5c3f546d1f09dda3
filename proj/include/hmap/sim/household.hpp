#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hmap/llm/backend.hpp"

namespace hmap::sim {

/// Deterministic rule-based stand-in for the LLM on household tasks. It reads
/// the same request text a live model would and answers in the requested
/// schema. It makes the mistakes of an unprimed model: it assumes receptacles
/// are open and forgets that an opening robot blocks the doorway, until the
/// prompt or the layer meta-prompt tells it otherwise. Used to author the
/// bundled cassettes.
class HouseholdBackend : public llm::Backend {
 public:
  HouseholdBackend();

  /// Phrase substitutions applied to root instructions before splitting.
  const std::vector<std::pair<std::string, std::string>>& lexicon() const { return lexicon_; }

 protected:
  std::string do_invoke(const llm::Request& request) override;

 private:
  std::string decompose(const llm::Request& request) const;
  std::string generate(const llm::Request& request) const;
  std::string decide(const llm::Request& request) const;
  std::string gradient(const llm::Request& request) const;
  std::string aggregate(const llm::Request& request) const;

  std::vector<std::pair<std::string, std::string>> lexicon_;
};

}  // namespace hmap::sim
