#include <iostream>

#include "cmps/cli.hpp"

int main(int argc, char** argv) {
  return cmps::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
