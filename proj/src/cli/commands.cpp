#include "hmap/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>

#include "hmap/eval/harness.hpp"
#include "hmap/hierarchy/orchestrate.hpp"
#include "hmap/llm/cassette.hpp"
#include "hmap/llm/live.hpp"
#include "hmap/sim/household.hpp"
#include "hmap/util/jsonl.hpp"
#include "hmap/util/text.hpp"

namespace hmap::cli {

using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendFlags {
  std::string kind = "cassette";
  std::string cassette;
  std::string record;
  std::string config;
  std::string endpoint;
  std::string model;
  std::string suite_name = "hmap";
  std::string recorded_at;
};

struct HierarchyFlags {
  int k_max = 5;
  int layers = 3;
  bool no_prompt_opt = false;
  bool no_sharing = false;
};

void add_backend_flags(CLI::App* app, BackendFlags& f) {
  app->add_option("--backend", f.kind, "live, cassette or sim")
      ->check(CLI::IsMember({"live", "cassette", "sim"}))
      ->capture_default_str();
  app->add_option("--cassette", f.cassette, "Cassette to replay (cassette backend)");
  app->add_option("--record", f.record, "Record every backend exchange into this cassette");
  app->add_option("--config", f.config, "Live backend config file (JSON)");
  app->add_option("--endpoint", f.endpoint, "Live endpoint; overrides env and config");
  app->add_option("--model", f.model, "Live model; overrides env and config");
  app->add_option("--suite-name", f.suite_name, "Suite name stored in a recorded cassette")->capture_default_str();
  app->add_option("--recorded-at", f.recorded_at, "Timestamp stored in a recorded cassette (default: now, UTC)");
}

void add_hierarchy_flags(CLI::App* app, HierarchyFlags& f) {
  app->add_option("--kmax", f.k_max, "Prompt-optimization iterations")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--layers", f.layers, "Hierarchy depth")->check(CLI::Range(2, 8))->capture_default_str();
  app->add_flag("--no-prompt-opt", f.no_prompt_opt, "Disable prompt and meta-prompt updates");
  app->add_flag("--no-sharing", f.no_sharing, "Disable meta-prompt updates");
}

hierarchy::Options options_from(const HierarchyFlags& f, std::size_t threads) {
  hierarchy::Options o;
  o.k_max = f.k_max;
  o.layers = f.layers;
  o.prompt_opt = !f.no_prompt_opt;
  o.sharing = !f.no_sharing && !f.no_prompt_opt;
  o.threads = std::max<std::size_t>(1, threads);
  return o;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Backends {
 public:
  explicit Backends(const BackendFlags& f) : flags_(f) {
    std::shared_ptr<llm::Backend> base;
    if (f.kind == "sim") {
      base = std::make_shared<sim::HouseholdBackend>();
    } else if (f.kind == "cassette") {
      if (f.cassette.empty()) throw ConfigError("--backend cassette needs --cassette PATH");
      if (!std::filesystem::exists(f.cassette)) throw ConfigError(f.cassette + ": file not found");
      try {
        base = std::make_shared<llm::CassetteBackend>(llm::Cassette::load(f.cassette));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    } else {
      std::optional<std::filesystem::path> path;
      if (!f.config.empty()) {
        if (!std::filesystem::exists(f.config)) throw ConfigError(f.config + ": file not found");
        path = f.config;
      }
      llm::LiveConfig cfg;
      try {
        cfg = llm::load_live_config(path);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      if (!f.endpoint.empty()) cfg.endpoint = f.endpoint;
      if (!f.model.empty()) cfg.model = f.model;
      base = std::make_shared<llm::LiveBackend>(cfg);
    }
    if (!f.record.empty()) {
      recorder_ = std::make_shared<llm::RecordingBackend>(base, f.suite_name,
                                                          f.recorded_at.empty() ? utc_now() : f.recorded_at);
      active_ = recorder_;
    } else {
      active_ = base;
    }
  }

  llm::Backend& get() { return *active_; }
  bool recording() const { return recorder_ != nullptr; }

  /// Merges this run's exchanges into the --record cassette.
  std::optional<std::filesystem::path> save() const {
    if (!recorder_) return std::nullopt;
    llm::Cassette merged = recorder_->cassette();
    if (std::filesystem::exists(flags_.record)) {
      llm::Cassette old = llm::Cassette::load(flags_.record);
      std::set<std::string> seen;
      for (const auto& e : old.entries) seen.insert(e.digest);
      for (const auto& e : merged.entries) {
        if (seen.insert(e.digest).second) old.entries.push_back(e);
      }
      old.suite = merged.suite;
      old.recorded_at = merged.recorded_at;
      merged = std::move(old);
    }
    if (const auto dir = std::filesystem::path(flags_.record).parent_path(); !dir.empty()) {
      std::filesystem::create_directories(dir);
    }
    merged.save(flags_.record);
    return std::filesystem::path(flags_.record);
  }

 private:
  BackendFlags flags_;
  std::shared_ptr<llm::Backend> active_;
  std::shared_ptr<llm::RecordingBackend> recorder_;
};

std::size_t default_parallel() { return std::max(1u, std::thread::hardware_concurrency()); }

void warn_misses(const util::Trace& trace, std::ostream& err) {
  std::size_t misses = 0;
  for (const auto& r : trace.records()) misses += util::contains(r.dump(), "cassette miss");
  if (misses > 0) err << "warning: " << misses << " trace record(s) mention a cassette miss\n";
}

std::vector<promptopt::PromptVersion> load_session(const std::filesystem::path& path, int layers) {
  std::vector<promptopt::PromptVersion> meta;
  const auto j = json::parse(util::read_file(path));
  for (const auto& m : j.at("meta")) meta.push_back(promptopt::PromptVersion::from_json(m));
  if (static_cast<int>(meta.size()) != layers) {
    throw ConfigError(path.string() + ": session has " + std::to_string(meta.size()) + " layers, expected " +
                      std::to_string(layers));
  }
  return meta;
}

// --- plan --------------------------------------------------------------------

struct PlanFlags {
  std::string instruction;
  std::string env;
  std::string out = "hmap-out";
  std::string session;
  std::size_t parallel = 1;
};

int cmd_plan(const PlanFlags& f, const BackendFlags& bf, const HierarchyFlags& hf, std::ostream& out,
             std::ostream& err) {
  hierarchy::Environment env;
  try {
    env = hierarchy::Environment::load(f.env);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  Backends backends(bf);
  hierarchy::Session session(options_from(hf, f.parallel));
  if (!f.session.empty() && std::filesystem::exists(f.session)) session.meta = load_session(f.session, hf.layers);

  const auto outcome = hierarchy::orchestrate(f.instruction, env, backends.get(), session);
  warn_misses(outcome.state.trace, err);

  const std::filesystem::path dir(f.out);
  std::filesystem::create_directories(dir);
  const auto trace_path = dir / "trace.jsonl";
  const auto prompts_path = dir / "prompts.jsonl";
  const auto plan_path = dir / "plan.json";
  outcome.state.trace.write(trace_path);
  std::string prompts;
  for (const auto& r : outcome.state.trace.of_kind("prompt")) prompts += r.dump() + "\n";
  util::write_file(prompts_path, prompts);

  json plan = {{"instruction", f.instruction},
               {"environment", env.name},
               {"success", outcome.success},
               {"iterations", outcome.iterations},
               {"backend_calls", outcome.backend_calls}};
  if (outcome.plan) {
    plan["plan"] = outcome.plan->to_json();
    plan["order"] = outcome.plan->canonical_names();
    plan["makespan"] = multirobot::makespan(*outcome.plan);
  }
  json leaves = json::array();
  for (const auto& l : outcome.leaves) {
    leaves.push_back({{"agent", l.agent}, {"robot", l.robot}, {"plan", l.plan}, {"domain", l.spec.domain_text},
                      {"problem", l.spec.problem_text}});
  }
  plan["leaves"] = leaves;
  if (outcome.last_failure) plan["last_failure"] = outcome.last_failure->to_json();
  util::write_file(plan_path, plan.dump(2) + "\n");

  out << "plan: " << plan_path.string() << "\n";
  out << "trace: " << trace_path.string() << "\n";
  out << "prompts: " << prompts_path.string() << "\n";
  if (!f.session.empty()) {
    json s = {{"meta", json::array()}};
    for (const auto& m : session.meta) s["meta"].push_back(m.to_json());
    util::write_file(f.session, s.dump(2) + "\n");
    out << "session: " << f.session << "\n";
  }
  if (const auto rec = backends.save()) out << "cassette: " << rec->string() << "\n";

  if (outcome.success) {
    err << "success after " << outcome.iterations << " iteration(s)\n";
    return kExitSuccess;
  }
  err << "failure after " << outcome.iterations << " iteration(s)";
  if (outcome.last_failure) err << ": " << promptopt::to_string(outcome.last_failure->cls);
  err << "\n";
  return kExitFailure;
}

// --- eval --------------------------------------------------------------------

struct EvalFlags {
  std::string suite = "data/suite";
  std::string out = "hmap-eval";
  int seeds = 5;
  std::size_t parallel = default_parallel();
  double fault_rate = 0;
};

int cmd_eval(const EvalFlags& f, const BackendFlags& bf, const HierarchyFlags& hf, std::ostream& out,
             std::ostream& err) {
  std::vector<eval::TaskCase> cases;
  try {
    cases = eval::load_suite(f.suite);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  Backends backends(bf);
  eval::RunConfig cfg;
  cfg.seeds = f.seeds;
  cfg.options = options_from(hf, 1);
  // Recording keeps the cassette in call order.
  cfg.parallel = backends.recording() ? 1 : f.parallel;
  cfg.fault_rate = f.fault_rate;

  const auto start = std::chrono::steady_clock::now();
  const auto report = eval::run_suite(cases, backends.get(), cfg);
  const auto files = eval::write_report(f.out, report, cases);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  out << report.metrics.table();
  for (const auto& p : files) out << "report: " << p.string() << "\n";
  if (const auto rec = backends.save()) out << "cassette: " << rec->string() << "\n";
  std::size_t errors = 0;
  for (const auto& e : report.episodes) errors += util::starts_with(e.failure, "error: ");
  err << report.episodes.size() << " episode(s), " << errors << " error(s), " << secs << " s\n";
  return kExitSuccess;
}

// --- prompts -----------------------------------------------------------------

struct PromptsFlags {
  std::string trace;
  std::string owner;
};

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::vector<std::string> changes(const promptopt::PromptBody& before, const promptopt::PromptBody& after) {
  std::vector<std::string> out;
  auto has = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  for (const auto& h : after.hints) {
    if (!has(before.hints, h)) out.push_back("Append " + quoted(h));
  }
  for (const auto& h : before.hints) {
    if (!has(after.hints, h)) out.push_back("Remove " + quoted(h));
  }
  for (const auto& c : after.constraints) {
    if (!has(before.constraints, c)) out.push_back("Insert constraint " + quoted(c));
  }
  for (const auto& c : before.constraints) {
    if (!has(after.constraints, c)) out.push_back("Remove constraint " + quoted(c));
  }
  if (out.empty() && !(before == after)) out.push_back("Reorder checks");
  if (out.empty()) out.push_back("No change");
  return out;
}

std::string added_text(const promptopt::PromptBody& before, const promptopt::PromptBody& after) {
  std::vector<std::string> added;
  for (const auto& h : after.hints) {
    if (std::find(before.hints.begin(), before.hints.end(), h) == before.hints.end()) added.push_back(h);
  }
  for (const auto& c : after.constraints) {
    if (std::find(before.constraints.begin(), before.constraints.end(), c) == before.constraints.end()) {
      added.push_back(c);
    }
  }
  return util::join(added, " ");
}

int cmd_prompts(const PromptsFlags& f, std::ostream& out) {
  if (!std::filesystem::exists(f.trace)) throw ConfigError(f.trace + ": file not found");
  const auto records = util::read_jsonl(f.trace);
  out << prompt_history(records, f.owner);
  return kExitSuccess;
}

}  // namespace

std::string prompt_history(const std::vector<json>& records, const std::string& owner) {
  if (records.empty()) throw std::invalid_argument("the log has no records");
  std::vector<json> versions;
  std::map<std::string, int> layer_of;
  std::map<std::string, std::vector<json>> meta_by_owner;
  for (const auto& r : records) {
    const std::string kind = r.value("kind", "");
    if (kind == "agent") layer_of[r.at("id")] = r.at("layer");
    if (kind != "prompt") continue;
    const std::string o = r.at("owner");
    if (o == owner) versions.push_back(r);
    if (util::starts_with(o, "meta/")) meta_by_owner[o].push_back(r);
  }
  if (versions.empty()) throw std::invalid_argument("no prompt versions for owner '" + owner + "'");

  std::string s = "Prompt history of " + owner + " (" + std::to_string(versions.size()) + " version" +
                  (versions.size() == 1 ? "" : "s") + ")\n\n";
  s += "Initial (v" + std::to_string(versions[0].at("version").get<int>()) + "):\n  " +
       quoted(versions[0].at("text")) + "\n";

  std::optional<std::string> meta_owner;
  if (const auto it = layer_of.find(owner); it != layer_of.end()) meta_owner = "meta/" + std::to_string(it->second);

  for (std::size_t i = 1; i < versions.size(); ++i) {
    const auto& prev = versions[i - 1];
    const auto& cur = versions[i];
    const int iteration = cur.value("iteration", 0);
    s += "\nIteration " + std::to_string(iteration) + " (v" + std::to_string(cur.at("version").get<int>()) + ")\n";
    s += "  Before:\n    ";
    s += i == 1 ? quoted(prev.at("text")) : std::string("Includes previous update");
    s += "\n  After:\n";
    const auto before = promptopt::PromptBody::from_json(prev.at("body"));
    const auto after = promptopt::PromptBody::from_json(cur.at("body"));
    for (const auto& c : changes(before, after)) s += "    " + c + "\n";
    if (meta_owner) {
      const auto& metas = meta_by_owner[*meta_owner];
      for (std::size_t m = 1; m < metas.size(); ++m) {
        if (metas[m].value("iteration", -1) != iteration) continue;
        const auto mb = promptopt::PromptBody::from_json(metas[m - 1].at("body"));
        const auto ma = promptopt::PromptBody::from_json(metas[m].at("body"));
        const std::string added = added_text(mb, ma);
        if (!added.empty()) s += "    Meta-prompt updated to " + quoted(added) + "\n";
      }
    }
  }
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical multi-agent LLM planner for multi-robot tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hmap 0.1.0");

  BackendFlags bf;
  HierarchyFlags hf;

  PlanFlags pf;
  auto* plan = app.add_subcommand("plan", "Plan one instruction in an environment");
  plan->add_option("instruction", pf.instruction, "Natural-language instruction")->required();
  plan->add_option("--env", pf.env, "Environment file (JSON)")->required();
  plan->add_option("--out", pf.out, "Output directory")->capture_default_str();
  plan->add_option("--session", pf.session, "Meta-prompt session file, read if present and rewritten");
  plan->add_option("--parallel", pf.parallel, "Concurrent agents within a layer")->capture_default_str();
  add_backend_flags(plan, bf);
  add_hierarchy_flags(plan, hf);

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "Run the task suite and report SR, GCR, RU and Eff");
  ev->add_option("--suite", ef.suite, "Suite directory")->capture_default_str();
  ev->add_option("--out", ef.out, "Report directory")->capture_default_str();
  ev->add_option("--seeds", ef.seeds, "Episodes per task")->check(CLI::PositiveNumber)->capture_default_str();
  ev->add_option("--parallel", ef.parallel, "Concurrent episodes")->capture_default_str();
  ev->add_option("--fault-rate", ef.fault_rate, "Probability of one injected fault per episode")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  add_backend_flags(ev, bf);
  add_hierarchy_flags(ev, hf);

  PromptsFlags rf;
  auto* pr = app.add_subcommand("prompts", "Print the version history of one prompt owner");
  pr->add_option("trace", rf.trace, "Trace or prompt log (JSON lines)")->required();
  pr->add_option("--owner", rf.owner, "Agent id such as E1.0, or meta/<layer>")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    // Subcommand help requests surface here too.
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kExitSuccess;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (plan->parsed()) return cmd_plan(pf, bf, hf, out, err);
    if (ev->parsed()) return cmd_eval(ef, bf, hf, out, err);
    return cmd_prompts(rf, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitConfig;
}

}  // namespace hmap::cli
