#include <iostream>

#include "ocoref/cli.h"

int main(int argc, char** argv) {
  return ocoref::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
