#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "hmap/llm/backend.hpp"

namespace hmap::llm {

struct LiveConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
};

/// Reads `path` (JSON: endpoint, model, api_key, timeout_ms, max_retries,
/// backoff_ms) when given, then overrides from HMAP_LLM_ENDPOINT,
/// HMAP_LLM_MODEL, HMAP_LLM_API_KEY and HMAP_LLM_TIMEOUT_MS.
LiveConfig load_live_config(const std::optional<std::filesystem::path>& path);

/// OpenAI-compatible chat completions at temperature 0. Connection failures
/// and 5xx responses are retried with exponential backoff; 429 is raised as
/// RateLimitedError carrying the server's retry-after.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveConfig config);

  /// HTTP attempts made so far, retries included.
  std::size_t attempts() const { return attempts_.load(); }

 protected:
  std::string do_invoke(const Request& request) override;

 private:
  LiveConfig config_;
  std::atomic<std::size_t> attempts_{0};
};

/// The chat messages sent for `request`.
nlohmann::json chat_body(const Request& request, const std::string& model);

}  // namespace hmap::llm
