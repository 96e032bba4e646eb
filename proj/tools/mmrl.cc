#include <iostream>

#include "mmrl/cli.h"

int main(int argc, char** argv) {
  return mmrl::run_cli(argc, argv, std::cout, std::cerr);
}
