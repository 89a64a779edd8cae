#include <iostream>

#include "p3s/cli.hpp"

int main(int argc, char** argv) {
  return p3s::cli::run(argc, argv, std::cout, std::cerr);
}
