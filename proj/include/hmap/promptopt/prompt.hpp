#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hmap::promptopt {

/// Prompts are kept structured so edits stay idempotent: a fixed base
/// sentence, constraints and hints. render() is the text the model sees.
struct PromptBody {
  std::string base;
  std::vector<std::string> constraints;
  std::vector<std::string> hints;

  /// `base Hint: "h1 h2"` followed by one `Constraint: c` line per constraint.
  std::string render() const;
  bool mentions(std::string_view payload) const;

  nlohmann::json to_json() const;
  static PromptBody from_json(const nlohmann::json& j);
  bool operator==(const PromptBody&) const = default;
};

inline constexpr std::size_t kPromptCap = 8 * 1024;
inline constexpr std::size_t kEditCap = 5;

struct PromptVersion {
  std::string owner;  // agent id, or `meta/<layer>`
  int version = 0;
  PromptBody body;
  std::string provenance;  // digest of the gradient that produced it; empty for version 0
  std::vector<std::string> evicted;  // hints dropped by the length cap in this step

  std::string text() const { return body.render(); }
  nlohmann::json to_json() const;
  static PromptVersion from_json(const nlohmann::json& j);
};

enum class EditKind { append_hint, insert_constraint, reorder_checks, remove_clause };

std::string_view to_string(EditKind kind);
/// Throws std::invalid_argument.
EditKind edit_kind_from_string(std::string_view s);

struct Edit {
  EditKind kind = EditKind::append_hint;
  std::string payload;
  int rank = 1;
  bool operator==(const Edit&) const = default;
};

/// Edits ordered by rank.
struct TextualGradient {
  std::vector<Edit> edits;

  bool empty() const { return edits.empty(); }
  std::string digest() const;
  nlohmann::json to_json() const;
  /// Expects an edits.v1 `edits` array. Sorts by rank.
  static TextualGradient from_json(const nlohmann::json& edits);
};

/// Applies the edits in rank order and bumps the version. Appending or
/// inserting a payload the prompt already mentions is a no-op. When the
/// rendered text exceeds kPromptCap the oldest hints are evicted.
PromptVersion tgd_step(const PromptVersion& prompt, const TextualGradient& gradient);

}  // namespace hmap::promptopt
