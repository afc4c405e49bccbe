#include <iostream>

#include "adtool/cli.hpp"

int main(int argc, char** argv) {
  return adtool::run(argc, argv, std::cout, std::cerr);
}
