#include <iostream>

#include "fluent/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fluent::cli::execute(args, std::cout, std::cerr);
}
