#include "hmap/util/trace.hpp"

#include "hmap/util/jsonl.hpp"

namespace hmap::util {

Trace::Trace(const Trace& other) : records_(other.records()) {}

Trace& Trace::operator=(const Trace& other) {
  if (this != &other) {
    auto copy = other.records();
    std::lock_guard lock(mu_);
    records_ = std::move(copy);
  }
  return *this;
}

void Trace::add(const std::string& kind, nlohmann::json record) {
  std::lock_guard lock(mu_);
  nlohmann::json r = {{"seq", records_.size()}, {"kind", kind}};
  r.update(record);
  records_.push_back(std::move(r));
}

std::vector<nlohmann::json> Trace::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<nlohmann::json> Trace::of_kind(const std::string& kind) const {
  std::vector<nlohmann::json> out;
  std::lock_guard lock(mu_);
  for (const auto& r : records_) {
    if (r.at("kind") == kind) out.push_back(r);
  }
  return out;
}

std::size_t Trace::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

void Trace::write(const std::filesystem::path& path) const { write_jsonl(path, records()); }

}  // namespace hmap::util
