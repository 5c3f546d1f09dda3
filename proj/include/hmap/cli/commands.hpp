#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmap::cli {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitFailure = 2;

/// Entry point of the `hmap` binary: plan, eval and prompts subcommands.
/// Artifact paths go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Iteration-by-iteration version history of `owner` from trace or prompt-log
/// records. Throws std::invalid_argument for an unknown owner or no records.
std::string prompt_history(const std::vector<nlohmann::json>& records, const std::string& owner);

}  // namespace hmap::cli
