#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <thread>

#include "hmap/pddl/parser.hpp"
#include "hmap/planner/planner.hpp"
#include "hmap/util/jsonl.hpp"
#include "hmap/util/text.hpp"

namespace hmap::planner {

std::string_view to_string(SolverFailure::Kind kind) {
  switch (kind) {
    case SolverFailure::Kind::launch: return "launch";
    case SolverFailure::Kind::nonzero_exit: return "nonzero-exit";
    case SolverFailure::Kind::timeout: return "timeout";
    case SolverFailure::Kind::unparseable_plan: return "unparseable-plan";
    case SolverFailure::Kind::invalid_plan: return "invalid-plan";
  }
  return "launch";
}

std::vector<pddl::ActionId> parse_plan_text(const pddl::GroundTask& task, std::string_view text) {
  std::vector<pddl::ActionId> steps;
  std::size_t lineno = 0;
  for (const auto& raw : util::split_lines(text)) {
    ++lineno;
    std::string line = util::trim(raw);
    if (line.empty() || line.front() == ';') continue;
    // Tolerate "0: (a b c)" and "(a b c) [1]" decorations some planners emit.
    const auto open = line.find('(');
    const auto close = line.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      throw PlanFormatError("line " + std::to_string(lineno) + ": expected '(action args...)', got '" +
                            line + "'");
    }
    const std::string inner = line.substr(open + 1, close - open - 1);
    if (inner.find('(') != std::string::npos || inner.find(')') != std::string::npos) {
      throw PlanFormatError("line " + std::to_string(lineno) + ": nested parentheses in '" + line + "'");
    }
    const auto words = util::split_words(util::to_lower(inner));
    if (words.empty()) throw PlanFormatError("line " + std::to_string(lineno) + ": empty action");
    const std::string name = "(" + util::join(words, " ") + ")";
    auto id = task.find_action(name);
    if (!id) {
      throw PlanFormatError("line " + std::to_string(lineno) + ": unknown ground action " + name);
    }
    steps.push_back(*id);
  }
  return steps;
}

namespace {

class TempDir {
 public:
  explicit TempDir(const std::filesystem::path& base) {
    static std::atomic<unsigned> counter{0};
    const auto root = base.empty() ? std::filesystem::temp_directory_path() : base;
    path_ = root / ("hmap-solver-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string substitute(std::string arg, const std::string& key, const std::string& value) {
  for (auto pos = arg.find(key); pos != std::string::npos; pos = arg.find(key, pos + value.size())) {
    arg.replace(pos, key.size(), value);
  }
  return arg;
}

struct ProcessResult {
  bool launched = false;
  std::string launch_error;
  bool timed_out = false;
  int exit_code = 0;
};

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout) {
  ProcessResult result;
  // Close-on-exec pipe: the child writes errno only if exec fails.
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    result.launch_error = std::string("pipe: ") + std::strerror(errno);
    return result;
  }
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    result.launch_error = std::string("fork: ") + std::strerror(errno);
    ::close(fds[0]);
    ::close(fds[1]);
    return result;
  }
  if (pid == 0) {
    ::close(fds[0]);
    const int devnull = ::open("/dev/null", O_WRONLY);
    if (devnull >= 0) {
      ::dup2(devnull, STDOUT_FILENO);
      ::dup2(devnull, STDERR_FILENO);
    }
    ::execvp(cargv[0], cargv.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(fds[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(fds[1]);
  int child_errno = 0;
  const auto n = ::read(fds[0], &child_errno, sizeof child_errno);
  ::close(fds[0]);
  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    ::waitpid(pid, nullptr, 0);
    result.launch_error = "exec " + argv.front() + ": " + std::strerror(child_errno);
    return result;
  }
  result.launched = true;

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0) {
      result.launch_error = std::string("waitpid: ") + std::strerror(errno);
      result.launched = false;
      return result;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      result.timed_out = true;
      return result;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

}  // namespace

ExternalResult external_solve(const pddl::Domain& domain, const pddl::Problem& problem,
                              const ExternalSolverConfig& config) {
  const pddl::GroundTask task = pddl::ground(domain, problem);
  TempDir dir(config.work_dir);
  const auto domain_path = dir.path() / "domain.pddl";
  const auto problem_path = dir.path() / "problem.pddl";
  const auto plan_path = dir.path() / "plan.txt";
  util::write_file(domain_path, pddl::serialize(domain));
  util::write_file(problem_path, pddl::serialize(problem));

  std::vector<std::string> argv{config.executable.string()};
  for (const auto& a : config.args) {
    std::string s = substitute(a, "{domain}", domain_path.string());
    s = substitute(s, "{problem}", problem_path.string());
    s = substitute(s, "{plan}", plan_path.string());
    argv.push_back(std::move(s));
  }

  const ProcessResult proc = run_process(argv, config.timeout);
  if (!proc.launched) return SolverFailure{SolverFailure::Kind::launch, proc.launch_error, 0, std::nullopt};
  if (proc.timed_out) {
    return SolverFailure{SolverFailure::Kind::timeout,
                         "solver exceeded " + std::to_string(config.timeout.count()) + " ms", 0,
                         std::nullopt};
  }
  if (proc.exit_code != 0) {
    return SolverFailure{SolverFailure::Kind::nonzero_exit,
                         "solver exited with status " + std::to_string(proc.exit_code), proc.exit_code,
                         std::nullopt};
  }

  std::vector<pddl::ActionId> steps;
  try {
    steps = parse_plan_text(task, util::read_file(plan_path));
  } catch (const std::exception& e) {
    return SolverFailure{SolverFailure::Kind::unparseable_plan, e.what(), 0, std::nullopt};
  }
  // A solver plan is accepted only after internal validation.
  auto report = pddl::validate_plan(task, steps);
  if (!report.valid) {
    return SolverFailure{SolverFailure::Kind::invalid_plan,
                         "solver plan fails validation: " + report.violated, 0, std::move(report)};
  }
  return Plan{std::move(steps), 0};
}

}  // namespace hmap::planner
