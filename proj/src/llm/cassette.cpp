#include "hmap/llm/cassette.hpp"

#include <algorithm>

#include "hmap/util/jsonl.hpp"

namespace hmap::llm {

namespace {

std::size_t shared_affixes(std::string_view a, std::string_view b) {
  std::size_t p = 0;
  while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
  std::size_t s = 0;
  while (s < a.size() - p && s < b.size() - p && a[a.size() - 1 - s] == b[b.size() - 1 - s]) ++s;
  return p + s;
}

std::string first_difference(const Request& a, const Request& b) {
  if (a.role != b.role) return "role";
  if (a.schema != b.schema) return "schema";
  if (canonicalize(a.prompt) != canonicalize(b.prompt)) return "prompt";
  if (canonicalize(a.meta_prompt) != canonicalize(b.meta_prompt)) return "meta_prompt";
  return "task";
}

}  // namespace

Cassette Cassette::load(const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  try {
    lines = util::read_jsonl(path);
  } catch (const std::exception& e) {
    throw BackendError(std::string("cannot read cassette: ") + e.what());
  }
  if (lines.empty() || lines[0].value("format", "") != "hmap-cassette") {
    throw BackendError(path.string() + ": not a cassette file");
  }
  if (lines[0].value("version", 0) != kVersion) {
    throw BackendError(path.string() + ": unsupported cassette version");
  }
  Cassette c;
  c.suite = lines[0].value("suite", "");
  c.recorded_at = lines[0].value("recorded_at", "");
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(i + 1);
    try {
      CassetteEntry e{lines[i].at("digest"), Request::from_json(lines[i].at("request")), lines[i].at("response")};
      if (digest(e.request) != e.digest) throw BackendError(where + ": digest does not match the request");
      if (!seen.emplace(e.digest, i).second) throw BackendError(where + ": duplicate digest " + e.digest);
      c.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw BackendError(where + ": " + e.what());
    }
  }
  return c;
}

void Cassette::save(const std::filesystem::path& path) const {
  std::vector<nlohmann::json> lines;
  lines.push_back({{"format", "hmap-cassette"}, {"version", kVersion}, {"suite", suite}, {"recorded_at", recorded_at}});
  for (const auto& e : entries) {
    lines.push_back({{"digest", e.digest}, {"request", e.request.to_json()}, {"response", e.response}});
  }
  util::write_jsonl(path, lines);
}

CassetteBackend::CassetteBackend(Cassette cassette, bool strict, std::string stub)
    : cassette_(std::move(cassette)), strict_(strict), stub_(std::move(stub)) {
  for (std::size_t i = 0; i < cassette_.entries.size(); ++i) index_.emplace(cassette_.entries[i].digest, i);
}

const Request* CassetteBackend::nearest(const Request& request) const {
  const Request* best = nullptr;
  std::size_t best_score = 0;
  const std::string want = request.prompt + '\x1f' + request.meta_prompt + '\x1f' + request.task;
  for (const auto& e : cassette_.entries) {
    if (e.request.role != request.role) continue;
    const std::size_t score =
        shared_affixes(want, e.request.prompt + '\x1f' + e.request.meta_prompt + '\x1f' + e.request.task);
    if (!best || score > best_score) {
      best = &e.request;
      best_score = score;
    }
  }
  return best;
}

std::string CassetteBackend::do_invoke(const Request& request) {
  const std::string d = digest(request);
  if (auto it = index_.find(d); it != index_.end()) return cassette_.entries[it->second].response;
  if (!strict_) return stub_;
  const Request* near = nearest(request);
  std::string msg = "cassette miss for " + std::string(to_string(request.role)) + " request " + d;
  if (near) {
    msg += "; nearest recorded request is " + digest(*near) + " (differs in " + first_difference(request, *near) + ")";
  } else {
    msg += "; no recorded request has this role";
  }
  throw CassetteMissError(msg, d, near ? std::optional<Request>(*near) : std::nullopt);
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::string suite, std::string recorded_at)
    : inner_(std::move(inner)) {
  cassette_.suite = std::move(suite);
  cassette_.recorded_at = std::move(recorded_at);
}

std::string RecordingBackend::do_invoke(const Request& request) {
  std::string response = inner_->invoke(request);
  const std::string d = digest(request);
  std::lock_guard lock(mu_);
  if (index_.emplace(d, cassette_.entries.size()).second) cassette_.entries.push_back({d, request, response});
  return response;
}

Cassette RecordingBackend::cassette() const {
  std::lock_guard lock(mu_);
  return cassette_;
}

void RecordingBackend::save(const std::filesystem::path& path) const { cassette().save(path); }

}  // namespace hmap::llm
