#include <unistd.h>

#include <cstdlib>
#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  const bool color = std::getenv("NO_COLOR") == nullptr && ::isatty(STDOUT_FILENO) != 0;
  return lfrefine::cli::run({argv + 1, argv + argc}, std::cout, std::cerr, color);
}
