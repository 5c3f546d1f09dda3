#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmap/llm/backend.hpp"

namespace hmap::llm {

struct CassetteEntry {
  std::string digest;
  Request request;
  std::string response;
};

/// Recorded request/response pairs.
///
/// File format (JSON lines):
///   line 1: {"format":"hmap-cassette","version":1,"suite":S,"recorded_at":T}
///   then one {"digest":D,"request":{role,prompt,meta_prompt,task,schema},"response":R}
///   per entry, in recording order.
struct Cassette {
  static constexpr int kVersion = 1;

  std::string suite;
  std::string recorded_at;
  std::vector<CassetteEntry> entries;

  /// Throws BackendError on a malformed file, a digest that does not match
  /// its request, or a duplicate digest.
  static Cassette load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

class CassetteMissError : public BackendError {
 public:
  CassetteMissError(const std::string& message, std::string digest, std::optional<Request> nearest)
      : BackendError(message), digest_(std::move(digest)), nearest_(std::move(nearest)) {}
  const std::string& digest() const { return digest_; }
  const std::optional<Request>& nearest() const { return nearest_; }

 private:
  std::string digest_;
  std::optional<Request> nearest_;
};

/// Replays responses by request digest.
class CassetteBackend : public Backend {
 public:
  /// In non-strict mode a miss returns `stub` instead of throwing.
  explicit CassetteBackend(Cassette cassette, bool strict = true, std::string stub = "{}");

  const Cassette& cassette() const { return cassette_; }

 protected:
  std::string do_invoke(const Request& request) override;

 private:
  const Request* nearest(const Request& request) const;

  Cassette cassette_;
  bool strict_;
  std::string stub_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Forwards to `inner` and records every distinct request.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::string suite, std::string recorded_at);

  Cassette cassette() const;
  void save(const std::filesystem::path& path) const;

 protected:
  std::string do_invoke(const Request& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  mutable std::mutex mu_;
  Cassette cassette_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace hmap::llm
