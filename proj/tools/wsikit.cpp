#include <iostream>
#include <string>
#include <vector>

#include "wsikit/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wsikit::cli::run(args, std::cout, std::cerr);
}
