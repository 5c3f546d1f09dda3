#include <doctest.h>

#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "hmap/llm/schema.hpp"
#include "hmap/promptopt/loss.hpp"
#include "hmap/promptopt/prompt.hpp"
#include "hmap/promptopt/update.hpp"
#include "hmap/sim/household.hpp"
#include "test_support.hpp"

using namespace hmap;
using namespace hmap::promptopt;
using nlohmann::json;
using hmap::testing::ScriptedBackend;

namespace {

const char* const kBase = "Decompose into subtasks as needed and assign them to robots.";
const char* const kOpenHint = "before putting the tomato into the fridge, it is necessary to open the fridge.";
const char* const kEgressHint = "after opening the fridge, move to a non-blocking waypoint to clear the doorway.";
const char* const kOpenRule =
    "for any subtask that places into a receptacle with open/close affordance, insert Open before any Put.";

PromptVersion base_prompt() { return PromptVersion{"E1.0", 0, PromptBody{kBase, {}, {}}, "", {}}; }

pddl::ValidationReport closed_fridge_report() {
  pddl::ValidationReport r;
  r.valid = false;
  r.kind = pddl::FailureKind::precondition;
  r.step = 2;
  r.action = "(put robot0 tomato fridge)";
  r.violated = "(opened fridge)";
  r.state = {"(at robot0 fridge)", "(holding robot0 tomato)", "(openable fridge)"};
  return r;
}

pddl::ValidationReport blocked_report() {
  pddl::ValidationReport r = closed_fridge_report();
  r.violated = "(not (doorway-blocked fridge))";
  r.state = {"(at robot0 fridge)", "(at robot1 fridge)", "(doorway-blocked fridge)", "(opened fridge)"};
  return r;
}

TextualLoss closed_fridge_loss(const PromptVersion& p, const std::string& source = "E1.0") {
  return loss_fn(p, source, LossClass::precondition, closed_fridge_report(), "put the tomato in the fridge");
}

std::string edits_response(const std::vector<Edit>& edits) {
  json a = json::array();
  for (const auto& e : edits) a.push_back({{"kind", to_string(e.kind)}, {"payload", e.payload}, {"rank", e.rank}});
  return json{{"edits", a}}.dump();
}

// Rendering spelled out independently of PromptBody::render.
std::string expected_render(const std::string& base, const std::vector<std::string>& hints,
                            const std::vector<std::string>& constraints) {
  std::string joined;
  for (std::size_t i = 0; i < hints.size(); ++i) joined += (i ? " " : "") + hints[i];
  std::string out = base + " Hint: \"" + joined + "\"";
  for (const auto& c : constraints) out += "\nConstraint: " + c;
  return out;
}

}  // namespace

TEST_CASE("prompt body renders base, hints and constraints") {
  PromptBody b{kBase, {}, {}};
  CHECK(b.render() == std::string(kBase) + " Hint: \"\"");
  b.hints = {"a.", "b."};
  b.constraints = {"c1", "c2"};
  CHECK(b.render() == expected_render(kBase, {"a.", "b."}, {"c1", "c2"}));
  CHECK(PromptBody::from_json(b.to_json()) == b);
}

TEST_CASE("loss_fn on a closed fridge names the action, the receptacle and the precondition") {
  const auto l = closed_fridge_loss(base_prompt());
  CHECK(l.cls == LossClass::precondition);
  CHECK(classify(closed_fridge_report()) == LossClass::precondition);
  CHECK(l.prose.find("(put robot0 tomato fridge)") != std::string::npos);
  CHECK(l.prose.find("precondition (opened fridge) does not hold") != std::string::npos);
  CHECK(l.prose.find("Failure class: precondition\nAgent: E1.0\n") == 0);
  CHECK(l.prose.find("Prompt: E1.0 v0") != std::string::npos);
}

TEST_CASE("loss_fn on a parse failure quotes the diagnostic") {
  const Diagnostic d{"problem", "unbalanced parentheses", 7, 3};
  const auto l = loss_fn(base_prompt(), "E2.0", LossClass::parse, d, "x");
  CHECK(l.cls == LossClass::parse);
  CHECK(l.prose.find("Failure class: parse") == 0);
  CHECK(l.prose.find("line 7") != std::string::npos);
  CHECK(l.prose.find("unbalanced parentheses") != std::string::npos);
}

TEST_CASE("loss_fn is deterministic and rerender tracks the prompt version") {
  const auto p = base_prompt();
  CHECK(closed_fridge_loss(p).prose == closed_fridge_loss(p).prose);
  CHECK(closed_fridge_loss(p).to_json() == closed_fridge_loss(p).to_json());
  auto p1 = p;
  p1.version = 1;
  const auto r = rerender(closed_fridge_loss(p), p1);
  CHECK(r.prose.find("Prompt: E1.0 v1") != std::string::npos);
  CHECK(r.prose.substr(0, r.prose.rfind("Prompt:")) ==
        closed_fridge_loss(p).prose.substr(0, closed_fridge_loss(p).prose.rfind("Prompt:")));
}

TEST_CASE("grad on the case-study losses yields the published hints") {
  sim::HouseholdBackend b;
  const auto p = base_prompt();
  const auto g0 = grad(p, closed_fridge_loss(p), b);
  REQUIRE(g0.edits.size() == 1);
  CHECK(g0.edits[0].kind == EditKind::append_hint);
  CHECK(g0.edits[0].rank == 1);
  CHECK(g0.edits[0].payload == kOpenHint);

  const auto l1 = loss_fn(p, "E1.0", LossClass::precondition, blocked_report(), "put the tomato in the fridge");
  const auto g1 = grad(p, l1, b);
  REQUIRE(g1.edits.size() == 1);
  CHECK(g1.edits[0].payload == kEgressHint);
  CHECK(g1.edits[0].payload.find("move to a non-blocking waypoint") != std::string::npos);
}

TEST_CASE("grad request carries the prompt and the loss prose") {
  ScriptedBackend b([](const llm::Request&) { return std::string(R"({"edits":[]})"); });
  const auto p = base_prompt();
  const auto l = closed_fridge_loss(p);
  const auto g = grad(p, l, b);
  CHECK(g.empty());
  REQUIRE(b.seen.size() == 1);
  CHECK(b.seen[0].role == llm::Role::grad);
  CHECK(b.seen[0].schema == llm::schema::kEdits);
  CHECK(b.seen[0].task == "Prompt under optimization:\n" + p.text() + "\n\n" + l.prose);
}

TEST_CASE("grad rejects nonconforming edit lists") {
  const auto p = base_prompt();
  const auto l = closed_fridge_loss(p);
  for (const std::string bad : {
           R"({"edits":[{"kind":"append-hint","payload":"a","rank":1},{"kind":"append-hint","payload":"b","rank":1}]})",
           R"({"edits":[{"kind":"rewrite","payload":"a","rank":1}]})",
           R"({"edits":[{"kind":"append-hint","payload":"","rank":1}]})",
           R"({"edits":[{"kind":"append-hint","payload":"a","rank":0}]})",
           R"({"edit":[]})",
           R"(not json)",
       }) {
    ScriptedBackend b([&](const llm::Request&) { return bad; });
    CAPTURE(bad);
    CHECK_THROWS_AS(grad(p, l, b), llm::SchemaError);
  }
  std::vector<Edit> six;
  for (int i = 1; i <= 6; ++i) six.push_back({EditKind::append_hint, "h" + std::to_string(i), i});
  ScriptedBackend over([&](const llm::Request&) { return edits_response(six); });
  CHECK_THROWS_AS(grad(p, l, over), llm::SchemaError);
  six.pop_back();
  ScriptedBackend at_cap([&](const llm::Request&) { return edits_response(six); });
  CHECK(grad(p, l, at_cap).edits.size() == kEditCap);
}

TEST_CASE("tgd_step reproduces the published iteration 0 prompt") {
  const auto v0 = base_prompt();
  CHECK(v0.text() == "Decompose into subtasks as needed and assign them to robots. Hint: \"\"");
  const TextualGradient g{{{EditKind::append_hint, kOpenHint, 1}}};
  const auto v1 = tgd_step(v0, g);
  CHECK(v1.version == 1);
  CHECK(v1.provenance == g.digest());
  CHECK(v1.text() == "Decompose into subtasks as needed and assign them to robots. Hint: \"" + std::string(kOpenHint) +
                         "\"");
  const auto v2 = tgd_step(v1, TextualGradient{{{EditKind::append_hint, kEgressHint, 1}}});
  CHECK(v2.text() == expected_render(kBase, {kOpenHint, kEgressHint}, {}));
}

TEST_CASE("tgd_step with an empty gradient keeps the text and bumps the version") {
  const auto v0 = base_prompt();
  const auto v1 = tgd_step(v0, TextualGradient{});
  CHECK(v1.text() == v0.text());
  CHECK(v1.version == 1);
}

TEST_CASE("tgd_step applies edits in rank order") {
  PromptVersion p = base_prompt();
  p.body.constraints = {"x", "y", "z"};
  auto g = TextualGradient::from_json(json::parse(R"([
    {"kind":"reorder-checks","payload":"z","rank":2},
    {"kind":"insert-constraint","payload":"w","rank":1},
    {"kind":"remove-clause","payload":"x","rank":3}])"));
  CHECK(g.edits[0].rank == 1);
  const auto q = tgd_step(p, g);
  CHECK(q.body.constraints == std::vector<std::string>{"z", "w", "y"});
}

TEST_CASE("tgd_step properties over random gradients") {
  std::mt19937 rng(7);
  const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta", "open the fridge", "egress"};
  const std::vector<EditKind> kinds = {EditKind::append_hint, EditKind::insert_constraint};
  for (int trial = 0; trial < 300; ++trial) {
    PromptVersion p = base_prompt();
    const int steps = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int s = 0; s < steps; ++s) {
      TextualGradient g;
      const int n = std::uniform_int_distribution<int>(0, 5)(rng);
      for (int i = 0; i < n; ++i) {
        g.edits.push_back({kinds[rng() % kinds.size()], pool[rng() % pool.size()], i + 1});
      }
      const auto once = tgd_step(p, g);
      const auto twice = tgd_step(once, g);
      CHECK(twice.text() == once.text());
      CHECK(once.version == p.version + 1);
      CHECK(twice.version == once.version + 1);
      // Every added payload is present, and no list holds a duplicate.
      for (const auto& e : g.edits) CHECK(once.body.mentions(e.payload));
      for (const auto* list : {&once.body.hints, &once.body.constraints}) {
        std::set<std::string> distinct(list->begin(), list->end());
        CHECK(distinct.size() == list->size());
      }
      p = once;
    }
  }
}

TEST_CASE("tgd_step evicts the oldest hints past the length cap") {
  PromptVersion p = base_prompt();
  const std::string big(3000, 'a');
  for (char c : std::string("xyz")) {
    p = tgd_step(p, TextualGradient{{{EditKind::append_hint, std::string(1, c) + big, 1}}});
  }
  CHECK(p.text().size() <= kPromptCap);
  REQUIRE(p.evicted.size() == 1);
  CHECK(p.evicted[0][0] == 'x');
  CHECK(p.body.hints.size() == 2);
  CHECK(PromptVersion::from_json(p.to_json()).text() == p.text());
}

TEST_CASE("aggregate deduplicates losses and skips empty sets") {
  int calls = 0;
  std::vector<std::string> tasks;
  ScriptedBackend b([&](const llm::Request& r) {
    ++calls;
    tasks.push_back(r.task);
    return json{{"objective", "o"}, {"candidates", json::array()}}.dump();
  });
  const auto p = base_prompt();
  const auto l = closed_fridge_loss(p);
  const auto other = loss_fn(p, "E1.1", LossClass::precondition, blocked_report(), "t");

  const auto empty = aggregate(1, {}, b);
  CHECK(empty.empty());
  CHECK(calls == 0);

  const auto one = aggregate(1, {l, other}, b);
  const auto two = aggregate(1, {l, other, other, l}, b);
  CHECK(one.contributions == 2);
  CHECK(two.to_json() == one.to_json());
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0] == tasks[1]);
  CHECK(aggregate(1, {l, l}, b).contributions == 1);
}

TEST_CASE("aggregate of open-before-put losses consolidates to the shared rule") {
  sim::HouseholdBackend b;
  const auto p = base_prompt();
  const auto l0 = closed_fridge_loss(p, "E1.0");
  auto p1 = p;
  p1.owner = "E1.1";
  const auto l1 = closed_fridge_loss(p1, "E1.1");
  const auto ll = aggregate(1, {l0, l1}, b);
  CHECK(ll.contributions == 2);
  CHECK(ll.objective == kOpenRule);

  const auto meta = hierarchy::default_meta(1);
  const auto g = meta_grad(meta, ll, b);
  REQUIRE(g.edits.size() == 1);
  CHECK(g.edits[0].payload == kOpenRule);
}

namespace {

hierarchy::HierarchyState small_state(bool prompt_opt = true, bool sharing = true) {
  hierarchy::HierarchyState s;
  s.options.prompt_opt = prompt_opt;
  s.options.sharing = sharing;
  auto add = [&](const std::string& id, int layer, std::optional<std::string> parent) {
    hierarchy::Agent a;
    a.id = id;
    a.layer = layer;
    a.parent = parent;
    a.prompt = hierarchy::default_prompt(id, layer, 3);
    a.output = hierarchy::AgentOutput{"digest-" + id, {}, {}, {}, {}};
    if (parent) s.agent(*parent).children.push_back(id);
    s.agents.push_back(a);
    s.phi.push_back(id);
  };
  add("E0.0", 0, std::nullopt);
  add("E1.0", 1, "E0.0");
  add("E1.1", 1, "E0.0");
  add("E2.0", 2, "E1.0");
  add("E2.1", 2, "E1.1");
  for (int l = 0; l < 3; ++l) s.meta.push_back(hierarchy::default_meta(l));
  s.next_index = {1, 2, 2};
  return s;
}

}  // namespace

TEST_CASE("prompt_update on the iteration 0 state updates the agent prompt and the layer meta-prompt") {
  auto s = small_state();
  sim::HouseholdBackend b;
  const auto loss = closed_fridge_loss(s.agent("E1.0").prompt);
  promptopt::prompt_update(s, {{"E1.0", loss}}, b);

  CHECK(s.agent("E1.0").prompt.version == 1);
  CHECK(s.agent("E1.0").prompt.text() == expected_render(kBase, {kOpenHint}, {}));
  CHECK(s.meta[1].version == 1);
  CHECK(s.meta[1].body.hints == std::vector<std::string>{kOpenRule});
  CHECK(s.meta[0].version == 0);
  CHECK(s.meta[2].version == 0);
  // Pruned subtree, reset output, untouched sibling.
  CHECK_FALSE(s.in_phi("E2.0"));
  CHECK_FALSE(s.agent("E1.0").output.has_value());
  CHECK(s.in_phi("E2.1"));
  CHECK(s.agent("E1.1").output.has_value());
  CHECK(s.agent("E1.1").prompt.version == 0);
}

TEST_CASE("prompt_update renders post-losses after every agent step") {
  auto s = small_state();
  sim::HouseholdBackend b;
  const std::map<std::string, TextualLoss> losses = {
      {"E1.0", closed_fridge_loss(s.agent("E1.0").prompt, "E1.0")},
      {"E1.1", closed_fridge_loss(s.agent("E1.1").prompt, "E1.1")}};
  promptopt::prompt_update(s, losses, b);

  long last_agent_prompt = -1;
  long first_post = -1;
  for (const auto& r : s.trace.records()) {
    const long seq = r.at("seq");
    if (r.at("kind") == "prompt" && r.at("owner").get<std::string>().rfind("E", 0) == 0) last_agent_prompt = seq;
    if (r.at("kind") == "loss" && r.at("stage") == "post" && first_post < 0) first_post = seq;
  }
  REQUIRE(first_post >= 0);
  CHECK(last_agent_prompt < first_post);
  const auto posts = s.trace.of_kind("loss");
  int post_count = 0;
  for (const auto& r : posts) {
    if (r.at("stage") == "post") {
      ++post_count;
      CHECK(r.at("loss").at("prompt_version") == 1);
    }
  }
  CHECK(post_count == 2);
  // Identical failures from two agents fold into one meta step.
  CHECK(s.meta[1].version == 1);
}

TEST_CASE("prompt history is reconstructable from the trace") {
  auto s = small_state();
  sim::HouseholdBackend b;
  promptopt::prompt_update(s, {{"E1.0", closed_fridge_loss(s.agent("E1.0").prompt)}}, b);
  auto loss2 = loss_fn(s.agent("E1.0").prompt, "E1.0", LossClass::precondition, blocked_report(), "t");
  promptopt::prompt_update(s, {{"E1.0", loss2}}, b);

  PromptVersion rebuilt = hierarchy::default_prompt("E1.0", 1, 3);
  for (const auto& r : s.trace.of_kind("gradient")) {
    if (r.at("owner") != "E1.0") continue;
    const auto g = TextualGradient::from_json(r.at("edits"));
    rebuilt = tgd_step(rebuilt, g);
  }
  CHECK(rebuilt.version == 2);
  CHECK(rebuilt.text() == s.agent("E1.0").prompt.text());
  CHECK(rebuilt.provenance == s.agent("E1.0").prompt.provenance);
  CHECK(s.meta[1].body.hints.size() == 2);
}

TEST_CASE("prompt_update without layer 1+ losses leaves meta-prompts alone") {
  auto s = small_state();
  sim::HouseholdBackend b;
  promptopt::prompt_update(s, {{"E0.0", closed_fridge_loss(s.agent("E0.0").prompt, "E0.0")}}, b);
  CHECK(s.agent("E0.0").prompt.version == 1);
  for (const auto& m : s.meta) CHECK(m.version == 0);
  CHECK(s.trace.of_kind("layer-loss").empty());
}

TEST_CASE("prompt_update without sharing skips the meta step") {
  auto s = small_state(true, false);
  sim::HouseholdBackend b;
  promptopt::prompt_update(s, {{"E1.0", closed_fridge_loss(s.agent("E1.0").prompt)}}, b);
  CHECK(s.agent("E1.0").prompt.version == 1);
  CHECK(s.meta[1].version == 0);
}

TEST_CASE("prompt_update with prompt optimisation off only prunes") {
  auto s = small_state(false, true);
  ScriptedBackend b([](const llm::Request&) -> std::string { throw std::logic_error("no call expected"); });
  promptopt::prompt_update(s, {{"E1.0", closed_fridge_loss(s.agent("E1.0").prompt)}}, b);
  CHECK(b.calls() == 0);
  CHECK(s.agent("E1.0").prompt.version == 0);
  CHECK_FALSE(s.in_phi("E2.0"));
  CHECK_FALSE(s.agent("E1.0").output.has_value());
}

TEST_CASE("prompt_update is atomic under backend failure") {
  auto s = small_state();
  const auto before_trace = s.trace.size();
  sim::HouseholdBackend sim;
  ScriptedBackend b([&](const llm::Request& r) -> std::string {
    if (r.role == llm::Role::aggregate) throw llm::BackendError("connection reset");
    return sim.invoke(r);
  });
  CHECK_THROWS_AS(promptopt::prompt_update(s, {{"E1.0", closed_fridge_loss(s.agent("E1.0").prompt)}}, b),
                  llm::BackendError);
  CHECK(s.agent("E1.0").prompt.version == 0);
  CHECK(s.meta[1].version == 0);
  CHECK(s.in_phi("E2.0"));
  CHECK(s.agent("E1.0").output.has_value());
  CHECK(s.trace.size() == before_trace);
}
