#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hmap::llm {

enum class Role { decompose, generate_pddl, decide, grad, aggregate };

std::string_view to_string(Role role);
/// Throws std::invalid_argument on an unknown tag.
Role role_from_string(std::string_view tag);

/// One model call: prompt, meta-prompt and task. `schema` names the structured output expected back.
struct Request {
  Role role = Role::decompose;
  std::string prompt;
  std::string meta_prompt;
  std::string task;
  std::string schema;

  nlohmann::json to_json() const;
  static Request from_json(const nlohmann::json& j);
  bool operator==(const Request&) const = default;
};

/// CRLF and CR become LF; trailing whitespace is removed from every line and
/// from the end of the text.
std::string canonicalize(std::string_view text);

/// SHA-256 over the role tag, schema id and canonicalized texts.
std::string digest(const Request& request);

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RateLimitedError : public BackendError {
 public:
  RateLimitedError(const std::string& message, std::chrono::seconds retry_after)
      : BackendError(message), retry_after_(retry_after) {}
  std::chrono::seconds retry_after() const { return retry_after_; }

 private:
  std::chrono::seconds retry_after_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  /// Safe for concurrent callers.
  std::string invoke(const Request& request) {
    ++calls_;
    return do_invoke(request);
  }
  std::size_t calls() const { return calls_.load(); }

 protected:
  virtual std::string do_invoke(const Request& request) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

}  // namespace hmap::llm
