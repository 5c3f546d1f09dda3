#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hmap::util {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

/// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace hmap::util
