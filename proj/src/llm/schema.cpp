#include "hmap/llm/schema.hpp"

#include <set>

namespace hmap::llm {

namespace {

using nlohmann::json;

const json& field(const json& j, const char* key, json::value_t type, std::string_view id) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(id) + ": missing field '" + key + "'");
  const json& v = j.at(key);
  const bool ok = type == json::value_t::number_integer ? v.is_number_integer() : v.type() == type;
  if (!ok) throw SchemaError(std::string(id) + ": field '" + key + "' has the wrong type");
  return v;
}

std::string nonempty_string(const json& j, const char* key, std::string_view id) {
  const std::string s = field(j, key, json::value_t::string, id);
  if (s.empty()) throw SchemaError(std::string(id) + ": field '" + key + "' is empty");
  return s;
}

void check_edits(const json& edits, std::string_view id) {
  if (!edits.is_array()) throw SchemaError(std::string(id) + ": edits must be an array");
  static const std::set<std::string> kinds{"append-hint", "insert-constraint", "reorder-checks", "remove-clause"};
  std::set<std::int64_t> ranks;
  for (const auto& e : edits) {
    const std::string kind = nonempty_string(e, "kind", id);
    if (!kinds.count(kind)) throw SchemaError(std::string(id) + ": unknown edit kind '" + kind + "'");
    nonempty_string(e, "payload", id);
    const std::int64_t rank = field(e, "rank", json::value_t::number_integer, id);
    if (rank < 1 || !ranks.insert(rank).second) throw SchemaError(std::string(id) + ": ranks must be distinct and positive");
  }
}

void check_subtasks(const json& j, std::string_view id) {
  const json& list = field(j, "subtasks", json::value_t::array, id);
  std::set<std::string> ids;
  for (const auto& s : list) {
    const std::string sid = nonempty_string(s, "id", id);
    if (!ids.insert(sid).second) throw SchemaError(std::string(id) + ": duplicate subtask id '" + sid + "'");
    nonempty_string(s, "text", id);
    nonempty_string(s, "target", id);
  }
  for (const auto& s : list) {
    if (!s.contains("depends_on")) continue;
    const json& deps = field(s, "depends_on", json::value_t::array, id);
    for (const auto& d : deps) {
      if (!d.is_string() || !ids.count(d.get<std::string>()) || d == s.at("id")) {
        throw SchemaError(std::string(id) + ": bad dependency in subtask '" + s.at("id").get<std::string>() + "'");
      }
    }
  }
}

}  // namespace

bool is_registered_schema(std::string_view id) {
  return id == schema::kSubtasks || id == schema::kPddl || id == schema::kDecision || id == schema::kEdits ||
         id == schema::kLayerLoss;
}

std::string describe_schema(std::string_view id) {
  if (id == schema::kSubtasks) {
    return R"(Respond with JSON {"subtasks":[{"id":string,"text":string,"target":robot or robot type,"depends_on":[ids of subtasks that must finish first]}]}.)";
  }
  if (id == schema::kPddl) return R"(Respond with JSON {"domain":PDDL domain text,"problem":PDDL problem text}.)";
  if (id == schema::kDecision) return R"(Respond with JSON {"decision":"self" or "parent"}.)";
  if (id == schema::kEdits) {
    return R"(Respond with JSON {"edits":[{"kind":"append-hint"|"insert-constraint"|"reorder-checks"|"remove-clause","payload":string,"rank":1-based integer}]}.)";
  }
  if (id == schema::kLayerLoss) {
    return R"(Respond with JSON {"objective":string,"candidates":[edit objects as in edits.v1]}.)";
  }
  throw SchemaError("unknown schema '" + std::string(id) + "'");
}

nlohmann::json parse_response(std::string_view id, std::string_view response) {
  if (!is_registered_schema(id)) throw SchemaError("unknown schema '" + std::string(id) + "'");
  json j = json::parse(response, nullptr, false);
  if (j.is_discarded()) throw SchemaError(std::string(id) + ": response is not JSON");
  if (!j.is_object()) throw SchemaError(std::string(id) + ": response is not a JSON object");
  if (id == schema::kSubtasks) {
    check_subtasks(j, id);
  } else if (id == schema::kPddl) {
    nonempty_string(j, "domain", id);
    nonempty_string(j, "problem", id);
  } else if (id == schema::kDecision) {
    field(j, "decision", json::value_t::string, id);
  } else if (id == schema::kEdits) {
    check_edits(field(j, "edits", json::value_t::array, id), id);
  } else {
    field(j, "objective", json::value_t::string, id);
    check_edits(field(j, "candidates", json::value_t::array, id), id);
  }
  return j;
}

}  // namespace hmap::llm
