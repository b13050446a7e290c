#include <iostream>

#include "string_rope/cli.hpp"

int main(int argc, char** argv) {
  return string_rope::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
