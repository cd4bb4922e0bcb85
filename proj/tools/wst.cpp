#include <iostream>
#include <string>
#include <vector>

#include "wst/app/modes.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wst::app::main_entry(args, std::cout, std::cerr);
}
