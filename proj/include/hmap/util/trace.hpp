#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmap::util {

/// Append-only run log. Every record gets a sequence number and a kind.
class Trace {
 public:
  Trace() = default;
  Trace(const Trace& other);
  Trace& operator=(const Trace& other);

  void add(const std::string& kind, nlohmann::json record);
  std::vector<nlohmann::json> records() const;
  std::vector<nlohmann::json> of_kind(const std::string& kind) const;
  std::size_t size() const;
  void write(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mu_;
  std::vector<nlohmann::json> records_;
};

}  // namespace hmap::util
