#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmap/eval/suite.hpp"
#include "hmap/hierarchy/state.hpp"
#include "hmap/llm/backend.hpp"

namespace hmap::eval {

/// Deletes `atom` from the state just before the first step named `before`.
struct Fault {
  std::string before;
  std::string atom;
  bool operator==(const Fault&) const = default;
};

struct FaultSpec {
  std::vector<Fault> faults;
  bool empty() const { return faults.empty(); }
  /// With probability `rate`, one fault on a uniformly drawn step deleting
  /// one of its positive preconditions; otherwise none.
  static FaultSpec random(const pddl::GroundTask& env, const multirobot::PartialOrderPlan& plan, std::uint64_t seed,
                          double rate);
};

struct ExecutionTrace {
  std::vector<std::vector<std::string>> states;  // initial state, then one per applied step
  std::vector<std::string> steps;                // applied steps in order
  std::vector<Fault> injected;
  pddl::ValidationReport report;
  std::vector<std::string> achieved;  // goal literals true where execution stopped
  bool success = false;
};

/// Applies the canonical linear extension step by step from `init`,
/// injecting faults. Failures are outcomes, not errors.
ExecutionTrace execute_symbolic(const pddl::GroundTask& env, const multirobot::PartialOrderPlan& plan,
                                const pddl::State& init, const FaultSpec& faults = {});

struct EpisodeResult {
  std::string task;
  std::uint64_t seed = 0;
  bool success = false;
  std::vector<std::string> achieved;
  std::size_t plan_actions = 0;
  std::size_t plan_makespan = 0;
  int iterations = 0;
  std::size_t backend_calls = 0;
  std::string failure;  // failure class, fault outcome or error text; empty on success
  double wall_ms = 0;   // not part of the serialized record

  nlohmann::json to_json() const;
  static EpisodeResult from_json(const nlohmann::json& j);
};

struct MetricRow {
  std::string label;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double sr = 0;
  double gcr = 0;
  double ru = 0;   // over successes; 0 when there are none
  double eff = 0;  // over successes; 0 when there are none
  nlohmann::json to_json() const;
};

struct MetricsReport {
  std::vector<MetricRow> rows;  // one per category present, then "all"
  const MetricRow& row(const std::string& label) const;
  nlohmann::json to_json() const;
  /// Column-aligned text table.
  std::string table() const;
};

/// Per-episode contributions, exposed for tests.
double goal_recall(const EpisodeResult& r, const TaskCase& t);
double utilization(const EpisodeResult& r, const TaskCase& t);
double efficiency(const EpisodeResult& r, const TaskCase& t);

/// Throws SuiteError when a result names an unknown task.
MetricsReport metrics(std::span<const EpisodeResult> results, std::span<const TaskCase> cases);

struct RunConfig {
  int seeds = 5;
  hierarchy::Options options;
  std::size_t parallel = 1;  // concurrent episodes
  double fault_rate = 0;
  std::map<std::string, FaultSpec> faults;  // scripted faults per task id; override fault_rate
};

struct SuiteReport {
  std::vector<EpisodeResult> episodes;  // in task order, then seed order
  MetricsReport metrics;
};

/// One orchestration run plus symbolic execution. Errors become failed results.
EpisodeResult run_episode(const TaskCase& task, std::uint64_t seed, llm::Backend& backend, const RunConfig& config);

SuiteReport run_suite(std::span<const TaskCase> cases, llm::Backend& backend, const RunConfig& config);

/// [{"id", "category", "goal", "gt_actions", "gt_makespan"}], for refolding
/// the metrics from the episode records alone.
nlohmann::json truths_json(std::span<const TaskCase> cases);

/// Writes episodes.jsonl, truths.json, metrics.json and table.txt; returns
/// their paths.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const SuiteReport& report,
                                                std::span<const TaskCase> cases);

}  // namespace hmap::eval
