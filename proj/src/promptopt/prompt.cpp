#include "hmap/promptopt/prompt.hpp"

#include <algorithm>
#include <stdexcept>

#include "hmap/util/text.hpp"

namespace hmap::promptopt {

std::string PromptBody::render() const {
  std::string out = base + " Hint: \"" + util::join(hints, " ") + "\"";
  for (const auto& c : constraints) out += "\nConstraint: " + c;
  return out;
}

bool PromptBody::mentions(std::string_view payload) const {
  return std::find(hints.begin(), hints.end(), payload) != hints.end() ||
         std::find(constraints.begin(), constraints.end(), payload) != constraints.end();
}

nlohmann::json PromptBody::to_json() const {
  return {{"base", base}, {"constraints", constraints}, {"hints", hints}};
}

PromptBody PromptBody::from_json(const nlohmann::json& j) {
  return PromptBody{j.at("base"), j.at("constraints"), j.at("hints")};
}

nlohmann::json PromptVersion::to_json() const {
  return {{"owner", owner}, {"version", version}, {"text", text()}, {"body", body.to_json()},
          {"provenance", provenance}, {"evicted", evicted}};
}

PromptVersion PromptVersion::from_json(const nlohmann::json& j) {
  return PromptVersion{j.at("owner"), j.at("version"), PromptBody::from_json(j.at("body")), j.at("provenance"),
                       j.value("evicted", std::vector<std::string>{})};
}

std::string_view to_string(EditKind kind) {
  switch (kind) {
    case EditKind::append_hint: return "append-hint";
    case EditKind::insert_constraint: return "insert-constraint";
    case EditKind::reorder_checks: return "reorder-checks";
    case EditKind::remove_clause: return "remove-clause";
  }
  return "?";
}

EditKind edit_kind_from_string(std::string_view s) {
  for (EditKind k : {EditKind::append_hint, EditKind::insert_constraint, EditKind::reorder_checks,
                     EditKind::remove_clause}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown edit kind '" + std::string(s) + "'");
}

std::string TextualGradient::digest() const { return util::sha256_hex(to_json().dump()); }

nlohmann::json TextualGradient::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : edits) out.push_back({{"kind", to_string(e.kind)}, {"payload", e.payload}, {"rank", e.rank}});
  return out;
}

TextualGradient TextualGradient::from_json(const nlohmann::json& edits) {
  TextualGradient g;
  for (const auto& e : edits) {
    g.edits.push_back({edit_kind_from_string(e.at("kind").get<std::string>()), e.at("payload"), e.at("rank")});
  }
  std::stable_sort(g.edits.begin(), g.edits.end(), [](const Edit& a, const Edit& b) { return a.rank < b.rank; });
  return g;
}

namespace {

void move_to_front(std::vector<std::string>& v, const std::string& item) {
  auto it = std::find(v.begin(), v.end(), item);
  if (it != v.end()) std::rotate(v.begin(), it, it + 1);
}

void erase_value(std::vector<std::string>& v, const std::string& item) {
  v.erase(std::remove(v.begin(), v.end(), item), v.end());
}

}  // namespace

PromptVersion tgd_step(const PromptVersion& prompt, const TextualGradient& gradient) {
  PromptVersion next = prompt;
  next.version = prompt.version + 1;
  next.provenance = gradient.digest();
  next.evicted.clear();
  PromptBody& b = next.body;
  for (const auto& e : gradient.edits) {
    switch (e.kind) {
      case EditKind::append_hint:
        if (!b.mentions(e.payload)) b.hints.push_back(e.payload);
        break;
      case EditKind::insert_constraint:
        if (!b.mentions(e.payload)) b.constraints.insert(b.constraints.begin(), e.payload);
        break;
      case EditKind::reorder_checks:
        move_to_front(b.constraints, e.payload);
        move_to_front(b.hints, e.payload);
        break;
      case EditKind::remove_clause:
        erase_value(b.constraints, e.payload);
        erase_value(b.hints, e.payload);
        break;
    }
  }
  while (b.render().size() > kPromptCap && !b.hints.empty()) {
    next.evicted.push_back(b.hints.front());
    b.hints.erase(b.hints.begin());
  }
  return next;
}

}  // namespace hmap::promptopt
