#include <iostream>

#include "gcner/cli.h"

int main(int argc, char** argv) {
  return gcner::run_cli(argc, argv, std::cout, std::cerr);
}
