#include <iostream>

#include "smad/cli.hpp"

int main(int argc, char** argv) {
  return smad::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
