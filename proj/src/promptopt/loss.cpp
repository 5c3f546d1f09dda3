#include "hmap/promptopt/loss.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "hmap/llm/schema.hpp"
#include "hmap/util/text.hpp"

namespace hmap::promptopt {

const char* const kGradPrompt =
    "You improve the instructions of a planning agent. Given the agent's current prompt and feedback about a "
    "failure it caused, propose ranked edits that would prevent the failure.";
const char* const kMetaGradPrompt =
    "You maintain guidance shared by every agent in one layer of a planning hierarchy. Given the current shared "
    "guidance and a consolidated objective, propose ranked edits to the guidance.";
const char* const kAggregatePrompt =
    "You consolidate feedback from several agents of the same layer. Remove duplicates, generalize overlapping "
    "failures into one objective, and list candidate edits.";

std::string_view to_string(LossClass c) {
  switch (c) {
    case LossClass::parse: return "parse";
    case LossClass::precondition: return "precondition";
    case LossClass::unsolvable: return "unsolvable";
    case LossClass::budget: return "budget";
    case LossClass::validation: return "validation";
    case LossClass::malformed_response: return "malformed-response";
  }
  return "?";
}

LossClass loss_class_from_string(std::string_view s) {
  for (LossClass c : {LossClass::parse, LossClass::precondition, LossClass::unsolvable, LossClass::budget,
                      LossClass::validation, LossClass::malformed_response}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown loss class '" + std::string(s) + "'");
}

nlohmann::json Diagnostic::to_json() const {
  return {{"what", what}, {"message", message}, {"line", line}, {"column", column}};
}

Diagnostic Diagnostic::from_json(const nlohmann::json& j) {
  return Diagnostic{j.at("what"), j.at("message"), j.value("line", std::size_t{0}), j.value("column", std::size_t{0})};
}

LossClass classify(const pddl::ValidationReport& report) {
  return report.kind == pddl::FailureKind::precondition ? LossClass::precondition : LossClass::validation;
}

namespace {

std::string render_report(const pddl::ValidationReport& r) {
  std::string s;
  switch (r.kind) {
    case pddl::FailureKind::precondition:
      s = "Plan step " + std::to_string(r.step.value_or(0)) + " " + r.action + " cannot be executed: precondition " +
          r.violated + " does not hold.";
      break;
    case pddl::FailureKind::unknown_action:
      s = "Plan step " + std::to_string(r.step.value_or(0)) + " " + r.action +
          " is not an action of the environment; it names an unknown object or skill.";
      break;
    case pddl::FailureKind::goal:
      s = "The plan executes but leaves goals unsatisfied: " + util::join(r.unsatisfied_goals, " ") + ".";
      break;
    case pddl::FailureKind::none:
      s = "The plan is valid.";
      break;
  }
  s += " State at that point: " + (r.state.empty() ? std::string("(empty)") : util::join(r.state, " ")) + ".";
  return s;
}

std::string render_diagnostic(LossClass cls, const Diagnostic& d) {
  std::string s;
  switch (cls) {
    case LossClass::parse:
      s = "The generated PDDL " + d.what + " does not parse";
      if (d.line > 0) s += " (line " + std::to_string(d.line) + ", column " + std::to_string(d.column) + ")";
      return s + ": " + d.message;
    case LossClass::malformed_response:
      return "The response does not follow the required format: " + d.message;
    case LossClass::unsolvable:
      return "The classical planner proved the generated problem unsolvable: " + d.message;
    case LossClass::budget:
      return "The classical planner ran out of budget: " + d.message;
    default:
      return "Validation failed (" + d.what + "): " + d.message;
  }
}

std::string render(const TextualLoss& l) {
  std::string s = "Failure class: " + std::string(to_string(l.cls)) + "\n";
  s += "Agent: " + l.source + "\n";
  if (!l.subtask.empty()) s += "Subtask: " + l.subtask + "\n";
  s += "Feedback: ";
  if (const auto* r = std::get_if<pddl::ValidationReport>(&l.evidence)) {
    s += render_report(*r);
  } else {
    s += render_diagnostic(l.cls, std::get<Diagnostic>(l.evidence));
  }
  s += "\nPrompt: " + l.prompt_owner + " v" + std::to_string(l.prompt_version);
  return s;
}

std::vector<Edit> checked_edits(const nlohmann::json& edits, std::size_t cap) {
  if (edits.size() > cap) {
    throw llm::SchemaError("edits.v1: " + std::to_string(edits.size()) + " edits exceed the cap of " +
                           std::to_string(cap));
  }
  return TextualGradient::from_json(edits).edits;
}

}  // namespace

nlohmann::json TextualLoss::to_json() const {
  nlohmann::json ev;
  if (const auto* r = std::get_if<pddl::ValidationReport>(&evidence)) {
    ev = {{"report", r->to_json()}};
  } else {
    ev = {{"diagnostic", std::get<Diagnostic>(evidence).to_json()}};
  }
  return {{"source", source}, {"class", to_string(cls)}, {"evidence", ev}, {"subtask", subtask},
          {"prompt_owner", prompt_owner}, {"prompt_version", prompt_version}, {"prose", prose}};
}

TextualLoss loss_fn(const PromptVersion& prompt, std::string source, LossClass cls, Evidence evidence,
                    std::string subtask) {
  TextualLoss l{std::move(source), cls, std::move(evidence), std::move(subtask), prompt.owner, prompt.version, ""};
  l.prose = render(l);
  return l;
}

TextualLoss rerender(const TextualLoss& loss, const PromptVersion& prompt) {
  return loss_fn(prompt, loss.source, loss.cls, loss.evidence, loss.subtask);
}

TextualGradient grad(const PromptVersion& prompt, const TextualLoss& loss, llm::Backend& backend, std::size_t cap) {
  llm::Request req{llm::Role::grad, kGradPrompt, "",
                   "Prompt under optimization:\n" + prompt.text() + "\n\n" + loss.prose, llm::schema::kEdits};
  const auto j = llm::parse_response(req.schema, backend.invoke(req));
  return TextualGradient{checked_edits(j.at("edits"), cap)};
}

nlohmann::json LayerLoss::to_json() const {
  return {{"layer", layer}, {"objective", objective}, {"candidates", candidates.to_json()},
          {"contributions", contributions}};
}

LayerLoss aggregate(int layer, const std::vector<TextualLoss>& losses, llm::Backend& backend, std::size_t cap) {
  LayerLoss out;
  out.layer = layer;
  std::set<std::string> distinct;
  for (const auto& l : losses) distinct.insert(l.prose);
  if (distinct.empty()) return out;
  out.contributions = distinct.size();
  std::string task = "Layer: " + std::to_string(layer) + "\n";
  std::size_t i = 0;
  for (const auto& p : distinct) task += "\nLoss " + std::to_string(++i) + ":\n" + p + "\n";
  llm::Request req{llm::Role::aggregate, kAggregatePrompt, "", task, llm::schema::kLayerLoss};
  const auto j = llm::parse_response(req.schema, backend.invoke(req));
  out.objective = j.at("objective");
  out.candidates.edits = checked_edits(j.at("candidates"), cap);
  return out;
}

TextualGradient meta_grad(const PromptVersion& meta, const LayerLoss& loss, llm::Backend& backend, std::size_t cap) {
  llm::Request req{llm::Role::grad, kMetaGradPrompt, "",
                   "Shared guidance under optimization:\n" + meta.text() + "\n\nLayer objective: " + loss.objective,
                   llm::schema::kEdits};
  const auto j = llm::parse_response(req.schema, backend.invoke(req));
  return TextualGradient{checked_edits(j.at("edits"), cap)};
}

}  // namespace hmap::promptopt
