#include <iostream>

#include "symts_cli.hpp"

int main(int argc, char** argv) {
  return symts::cli::main_entry(argc, argv, std::cout, std::cerr);
}
