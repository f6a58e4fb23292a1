#include <iostream>
#include <string>
#include <vector>

#include "submix/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return submix::cli::run(args, std::cin, std::cout, std::cerr, submix::cli::process_environment());
}
