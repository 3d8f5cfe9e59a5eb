#include <iostream>
#include <string>
#include <vector>

#include "conj3/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return conj3::run_cli(args, std::cout, std::cerr);
}
