#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hmap::llm {

/// Structured output formats the agents exchange with the backend.
namespace schema {
inline constexpr const char* kSubtasks = "subtasks.v1";
inline constexpr const char* kPddl = "pddl.v1";
inline constexpr const char* kDecision = "decision.v1";
inline constexpr const char* kEdits = "edits.v1";
inline constexpr const char* kLayerLoss = "layer-loss.v1";
}  // namespace schema

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_registered_schema(std::string_view id);

/// One-paragraph description of the expected JSON, given to live models.
std::string describe_schema(std::string_view id);

/// Parses `response` and checks it against schema `id`. Throws SchemaError.
nlohmann::json parse_response(std::string_view id, std::string_view response);

}  // namespace hmap::llm
