#include <iostream>
#include <string>
#include <vector>

#include "deepar/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return deepar::run_cli(args, std::cout, std::cerr);
}
