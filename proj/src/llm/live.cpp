#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "hmap/llm/live.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "hmap/llm/schema.hpp"
#include "hmap/util/jsonl.hpp"

namespace hmap::llm {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base;    // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw BackendError("endpoint '" + url + "' has no scheme");
  const auto path = url.find('/', scheme + 3);
  Endpoint e{url.substr(0, path), path == std::string::npos ? "" : url.substr(path)};
  while (!e.base.empty() && e.base.back() == '/') e.base.pop_back();
  return e;
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

LiveConfig load_live_config(const std::optional<std::filesystem::path>& path) {
  LiveConfig c;
  if (path) {
    const auto j = nlohmann::json::parse(util::read_file(*path));
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.api_key = j.value("api_key", c.api_key);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(c.timeout.count())));
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<std::int64_t>(c.backoff.count())));
  }
  if (auto v = env("HMAP_LLM_ENDPOINT")) c.endpoint = *v;
  if (auto v = env("HMAP_LLM_MODEL")) c.model = *v;
  if (auto v = env("HMAP_LLM_API_KEY")) c.api_key = *v;
  if (auto v = env("HMAP_LLM_TIMEOUT_MS")) c.timeout = std::chrono::milliseconds(std::stoll(*v));
  return c;
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) { split_endpoint(config_.endpoint); }

nlohmann::json chat_body(const Request& request, const std::string& model) {
  std::string system = request.prompt;
  if (!request.meta_prompt.empty()) system += "\n\n" + request.meta_prompt;
  std::string user = request.task;
  if (is_registered_schema(request.schema)) user += "\n\n" + describe_schema(request.schema);
  return {{"model", model},
          {"temperature", 0},
          {"response_format", {{"type", "json_object"}}},
          {"messages", {{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}}}};
}

std::string LiveBackend::do_invoke(const Request& request) {
  const Endpoint ep = split_endpoint(config_.endpoint);
  const std::string body = chat_body(request, config_.model).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    ++attempts_;
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(ep.base + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429) {
      long retry = 0;
      if (res->has_header("Retry-After")) retry = std::strtol(res->get_header_value("Retry-After").c_str(), nullptr, 10);
      throw RateLimitedError("rate limited by " + config_.endpoint, std::chrono::seconds(retry));
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("endpoint returned status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError("unexpected chat completion body: " + res->body.substr(0, 200));
    }
  }
  throw BackendError(last_error + " after " + std::to_string(config_.max_retries + 1) + " attempts");
}

}  // namespace hmap::llm
