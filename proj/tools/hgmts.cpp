#include <iostream>

#include "hgmts/cli.hpp"

int main(int argc, char** argv) {
  return hgmts::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
