#include <iostream>

#include "popsyn/cli.hpp"

int main(int argc, char** argv) {
  return popsyn::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
