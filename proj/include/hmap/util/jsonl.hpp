#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmap::util {

/// Line-delimited JSON records, one compact object per line.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace hmap::util
