#include <iostream>
#include <string>
#include <vector>

#include "hvfa/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return hvfa::cli::dispatch(args, std::cout, std::cerr);
}
