#include <iostream>

#include "finemotion/cli/cli.hpp"

int main(int argc, char** argv) {
  return finemotion::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
