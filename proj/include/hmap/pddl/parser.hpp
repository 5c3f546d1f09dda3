#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "hmap/pddl/ast.hpp"

namespace hmap::pddl {

/// Syntax or model error with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }
  /// Message without the position prefix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  int line_;
  int column_;
};

/// A `:requirements` flag outside the supported STRIPS subset.
class UnsupportedRequirementError : public ParseError {
 public:
  UnsupportedRequirementError(const std::string& requirement, int line, int column);
  const std::string& requirement() const { return requirement_; }

 private:
  std::string requirement_;
};

/// Requirements accepted by the parser.
bool is_supported_requirement(std::string_view requirement);

/// Names are case-folded to lower case; PDDL identifiers are case-insensitive.
Domain parse_domain(std::string_view text);
Problem parse_problem(std::string_view text);
/// Parses and checks the problem against `domain`.
Problem parse_problem(std::string_view text, const Domain& domain);

std::string serialize(const Domain& domain);
std::string serialize(const Problem& problem);

}  // namespace hmap::pddl
