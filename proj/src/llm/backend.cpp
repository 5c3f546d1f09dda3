#include "hmap/llm/backend.hpp"

#include "hmap/util/text.hpp"

namespace hmap::llm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::decompose: return "decompose";
    case Role::generate_pddl: return "generate-pddl";
    case Role::decide: return "decide";
    case Role::grad: return "grad";
    case Role::aggregate: return "aggregate";
  }
  return "?";
}

Role role_from_string(std::string_view tag) {
  for (Role r : {Role::decompose, Role::generate_pddl, Role::decide, Role::grad, Role::aggregate}) {
    if (to_string(r) == tag) return r;
  }
  throw std::invalid_argument("unknown role '" + std::string(tag) + "'");
}

nlohmann::json Request::to_json() const {
  return {{"role", to_string(role)}, {"prompt", prompt}, {"meta_prompt", meta_prompt},
          {"task", task}, {"schema", schema}};
}

Request Request::from_json(const nlohmann::json& j) {
  return Request{role_from_string(j.at("role").get<std::string>()), j.at("prompt"), j.at("meta_prompt"),
                 j.at("task"), j.at("schema")};
}

std::string canonicalize(std::string_view text) {
  std::string lf;
  lf.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      lf += '\n';
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      lf += text[i];
    }
  }
  std::string out;
  out.reserve(lf.size());
  std::size_t start = 0;
  while (start <= lf.size()) {
    std::size_t end = lf.find('\n', start);
    if (end == std::string::npos) end = lf.size();
    std::size_t stop = end;
    while (stop > start && (lf[stop - 1] == ' ' || lf[stop - 1] == '\t')) --stop;
    out.append(lf, start, stop - start);
    if (end == lf.size()) break;
    out += '\n';
    start = end + 1;
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ' || out.back() == '\t')) out.pop_back();
  return out;
}

std::string digest(const Request& request) {
  // Length-prefixed fields so that boundaries cannot shift between fields.
  std::string buf;
  auto put = [&](std::string_view s) {
    buf += std::to_string(s.size());
    buf += ':';
    buf += s;
  };
  put(to_string(request.role));
  put(request.schema);
  put(canonicalize(request.prompt));
  put(canonicalize(request.meta_prompt));
  put(canonicalize(request.task));
  return util::sha256_hex(buf);
}

}  // namespace hmap::llm
