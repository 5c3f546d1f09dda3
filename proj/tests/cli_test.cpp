#include <doctest.h>

#include <sstream>

#include "hmap/cli/commands.hpp"
#include "hmap/llm/cassette.hpp"
#include "hmap/util/jsonl.hpp"
#include "test_support.hpp"

using namespace hmap;
using nlohmann::json;

namespace {

constexpr const char* kCaseStudy = "Put the tomato in the fridge and turn off the room light.";

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run hmap_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string kitchen() { return (testing::data_dir() / "envs/kitchen.json").string(); }
std::string cassette(const std::string& name) { return (testing::data_dir() / "cassettes" / (name + ".jsonl")).string(); }

}  // namespace

TEST_CASE("plan replays the case-study cassette and writes artifacts") {
  const auto dir = testing::scratch_dir("cli-plan");
  const auto r = hmap_cli({"plan", kCaseStudy, "--env", kitchen(), "--cassette", cassette("case_study"), "--out",
                           dir.string(), "--parallel", "2"});
  CHECK(r.code == cli::kExitSuccess);
  CHECK(r.out.find((dir / "plan.json").string()) != std::string::npos);
  CHECK(r.err.find("cassette miss") == std::string::npos);
  const auto plan = json::parse(util::read_file(dir / "plan.json"));
  CHECK(plan.at("success") == true);
  CHECK(plan.at("iterations") == 3);
  CHECK(plan.at("makespan") == 4);
  CHECK(plan.at("leaves").size() == 3);
  CHECK(!util::read_jsonl(dir / "trace.jsonl").empty());
  for (const auto& r : util::read_jsonl(dir / "prompts.jsonl")) CHECK(r.at("kind") == "prompt");
}

TEST_CASE("plan exit codes") {
  const auto dir = testing::scratch_dir("cli-codes");
  SUBCASE("k_max failure") {
    const auto r = hmap_cli({"plan", "Keep the tomato somewhere cold.", "--env", kitchen(), "--cassette",
                             cassette("kmax_failure"), "--out", dir.string()});
    CHECK(r.code == cli::kExitFailure);
    CHECK(json::parse(util::read_file(dir / "plan.json")).at("iterations") == 5);
  }
  SUBCASE("missing environment") {
    const auto r = hmap_cli({"plan", "x", "--env", (dir / "none.json").string(), "--backend", "sim"});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("file not found") != std::string::npos);
  }
  SUBCASE("cassette backend without a cassette") {
    const auto r = hmap_cli({"plan", "x", "--env", kitchen()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("--cassette") != std::string::npos);
  }
  SUBCASE("unknown backend") {
    CHECK(hmap_cli({"plan", "x", "--env", kitchen(), "--backend", "oracle"}).code == cli::kExitConfig);
  }
  SUBCASE("cassette miss is reported") {
    const auto r = hmap_cli({"plan", "Turn off the room light.", "--env", kitchen(), "--cassette",
                             cassette("case_study"), "--out", dir.string(), "--kmax", "1"});
    CHECK(r.code == cli::kExitFailure);
    CHECK(r.err.find("cassette miss") != std::string::npos);
  }
}

TEST_CASE("record merges into an existing cassette") {
  const auto dir = testing::scratch_dir("cli-record");
  const auto path = (dir / "c.jsonl").string();
  auto record = [&](const std::string& env) {
    return hmap_cli({"plan", kCaseStudy, "--env", env, "--backend", "sim", "--record", path, "--recorded-at",
                     "2026-01-01T00:00:00Z", "--out", (dir / "out").string()});
  };
  CHECK(record(kitchen()).code == cli::kExitSuccess);
  const auto first = llm::Cassette::load(path);
  CHECK(first.recorded_at == "2026-01-01T00:00:00Z");
  CHECK(record(kitchen()).code == cli::kExitSuccess);
  CHECK(llm::Cassette::load(path).entries.size() == first.entries.size());
  CHECK(record((testing::data_dir() / "envs/larder.json").string()).code != cli::kExitConfig);
  CHECK(llm::Cassette::load(path).entries.size() > first.entries.size());

  const auto replay = hmap_cli({"plan", kCaseStudy, "--env", kitchen(), "--cassette", path, "--out",
                                (dir / "replay").string()});
  CHECK(replay.code == cli::kExitSuccess);
}

TEST_CASE("session file carries meta-prompts") {
  const auto dir = testing::scratch_dir("cli-session");
  const auto larder = (testing::data_dir() / "envs/larder.json").string();
  const std::string second = "Put the tomato in the fridge, place the apple on the table, then turn off the room light.";
  auto iterations = [&](const std::string& mode, std::vector<std::string> extra) {
    const auto session = (dir / (mode + ".json")).string();
    std::vector<std::string> a = {"plan", kCaseStudy, "--env", kitchen(), "--cassette", cassette("sharing_" + mode),
                                  "--session", session, "--out", (dir / mode).string()};
    a.insert(a.end(), extra.begin(), extra.end());
    REQUIRE(hmap_cli(a).code == cli::kExitSuccess);
    std::vector<std::string> b = {"plan", second, "--env", larder, "--cassette", cassette("sharing_" + mode),
                                  "--session", session, "--out", (dir / mode).string()};
    b.insert(b.end(), extra.begin(), extra.end());
    REQUIRE(hmap_cli(b).code == cli::kExitSuccess);
    return json::parse(util::read_file(dir / mode / "plan.json")).at("iterations").get<int>();
  };
  CHECK(iterations("on", {}) == 1);
  CHECK(iterations("off", {"--no-sharing"}) == 3);
}

TEST_CASE("eval prints the table and writes the report") {
  const auto dir = testing::scratch_dir("cli-eval");
  const auto r = hmap_cli({"eval", "--suite", (testing::data_dir() / "suite").string(), "--cassette",
                           cassette("suite"), "--seeds", "2", "--out", dir.string(), "--parallel", "3"});
  CHECK(r.code == cli::kExitSuccess);
  CHECK(r.out.rfind("Category  Episodes     SR    GCR     RU    Eff\n", 0) == 0);
  CHECK(r.out.find("all             24") != std::string::npos);
  CHECK(util::read_file(dir / "table.txt").rfind("Category", 0) == 0);
  CHECK(util::read_jsonl(dir / "episodes.jsonl").size() == 24);

  const auto bad = testing::scratch_dir("cli-eval-bad");
  util::write_file(bad / "broken.json", "{\"id\": ");
  const auto e = hmap_cli({"eval", "--suite", bad.string(), "--backend", "sim"});
  CHECK(e.code == cli::kExitConfig);
  CHECK(e.err.find("broken.json") != std::string::npos);
}

TEST_CASE("prompts renders the version history") {
  const auto dir = testing::scratch_dir("cli-prompts");
  REQUIRE(hmap_cli({"plan", kCaseStudy, "--env", kitchen(), "--cassette", cassette("case_study"), "--out",
                    dir.string()})
              .code == cli::kExitSuccess);
  const auto r = hmap_cli({"prompts", (dir / "trace.jsonl").string(), "--owner", "E1.0"});
  CHECK(r.code == cli::kExitSuccess);
  CHECK(r.out.find("Initial (v0):") != std::string::npos);
  CHECK(r.out.find("Iteration 0 (v1)") != std::string::npos);
  CHECK(r.out.find("Includes previous update") != std::string::npos);
  CHECK(r.out.find("Append \"before putting the tomato into the fridge, it is necessary to open the fridge.\"") !=
        std::string::npos);
  CHECK(r.out.find("Meta-prompt updated to \"append an egress action to a non-blocking waypoint to clear the "
                   "doorway.\"") != std::string::npos);
  CHECK(hmap_cli({"prompts", (dir / "prompts.jsonl").string(), "--owner", "E1.0"}).out.find("(3 versions)") !=
        std::string::npos);

  CHECK(hmap_cli({"prompts", (dir / "trace.jsonl").string(), "--owner", "E7.7"}).code == cli::kExitConfig);
  util::write_file(dir / "empty.jsonl", "");
  CHECK(hmap_cli({"prompts", (dir / "empty.jsonl").string(), "--owner", "E1.0"}).code == cli::kExitConfig);
  CHECK(hmap_cli({"prompts", (dir / "none.jsonl").string(), "--owner", "E1.0"}).code == cli::kExitConfig);
}

TEST_CASE("help and usage errors") {
  CHECK(hmap_cli({"--help"}).code == cli::kExitSuccess);
  CHECK(hmap_cli({"plan", "--help"}).out.find("--kmax") != std::string::npos);
  CHECK(hmap_cli({}).code == cli::kExitConfig);
  CHECK(hmap_cli({"plan", "x"}).code == cli::kExitConfig);
}
