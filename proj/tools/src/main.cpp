#include <iostream>

#include "ilsim_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ilsim::cli::run(args, std::cout, std::cerr);
}
