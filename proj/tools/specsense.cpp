#include <iostream>

#include "specsense/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return specsense::run_cli(args, std::cout, std::cerr);
}
