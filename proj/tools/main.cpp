#include <iostream>
#include <string>
#include <vector>

#include "brsent/experiment.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return brsent::cli_main(args, std::cout, std::cerr);
}
