#include <iostream>
#include <string>
#include <vector>

#include "fbsvie/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fbsvie::run_cli(args, std::cout, std::cerr);
}
