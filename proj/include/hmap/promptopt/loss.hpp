#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hmap/llm/backend.hpp"
#include "hmap/pddl/validate.hpp"
#include "hmap/promptopt/prompt.hpp"

namespace hmap::promptopt {

enum class LossClass { parse, precondition, unsolvable, budget, validation, malformed_response };

std::string_view to_string(LossClass c);
LossClass loss_class_from_string(std::string_view s);

/// Failure evidence that is not a validation report: parser and schema
/// diagnostics, search outcomes, capability violations.
struct Diagnostic {
  std::string what;     // e.g. "problem", "response", "search", "capability"
  std::string message;
  std::size_t line = 0;  // 0 when not applicable
  std::size_t column = 0;

  nlohmann::json to_json() const;
  static Diagnostic from_json(const nlohmann::json& j);
  bool operator==(const Diagnostic&) const = default;
};

using Evidence = std::variant<pddl::ValidationReport, Diagnostic>;

/// Classifies a failed validation report: precondition for violated
/// preconditions, validation otherwise.
LossClass classify(const pddl::ValidationReport& report);

struct TextualLoss {
  std::string source;  // agent the loss is attributed to
  LossClass cls = LossClass::validation;
  Evidence evidence;
  std::string subtask;  // task text of the agent that failed
  std::string prompt_owner;
  int prompt_version = 0;
  std::string prose;

  nlohmann::json to_json() const;
};

/// Renders the loss prose from the evidence. Identical inputs give identical text.
TextualLoss loss_fn(const PromptVersion& prompt, std::string source, LossClass cls, Evidence evidence,
                    std::string subtask);

/// The same evidence rendered against a newer prompt version.
TextualLoss rerender(const TextualLoss& loss, const PromptVersion& prompt);

/// Asks the backend for ranked edits to `prompt`. Throws llm::SchemaError on a
/// nonconforming response or more than `cap` edits.
TextualGradient grad(const PromptVersion& prompt, const TextualLoss& loss, llm::Backend& backend,
                     std::size_t cap = kEditCap);

struct LayerLoss {
  int layer = 0;
  std::string objective;
  TextualGradient candidates;
  std::size_t contributions = 0;  // distinct losses folded in

  bool empty() const { return contributions == 0; }
  nlohmann::json to_json() const;
};

/// Consolidates the losses of one layer. Byte-identical losses count once; an
/// empty set gives an empty LayerLoss without calling the backend.
LayerLoss aggregate(int layer, const std::vector<TextualLoss>& losses, llm::Backend& backend,
                    std::size_t cap = kEditCap);

/// Meta-gradient: edits to the layer meta-prompt driven by the objective only.
TextualGradient meta_grad(const PromptVersion& meta, const LayerLoss& loss, llm::Backend& backend,
                          std::size_t cap = kEditCap);

/// Static instructions used for gradient and aggregation requests.
extern const char* const kGradPrompt;
extern const char* const kMetaGradPrompt;
extern const char* const kAggregatePrompt;

}  // namespace hmap::promptopt
