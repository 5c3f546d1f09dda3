#include <iostream>
#include <string>
#include <vector>

#include "hmap/cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return hmap::cli::run(args, std::cout, std::cerr);
}
