#include <iostream>

#include "cpm/commands.hpp"

int main(int argc, char** argv) {
  return cpm::RunCli(argc, argv, std::cout, std::cerr);
}
