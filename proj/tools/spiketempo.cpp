#include <iostream>
#include <string>
#include <vector>

#include "spiketempo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return spiketempo::run_command(args, std::cout, std::cerr);
}
