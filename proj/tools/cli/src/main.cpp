#include <iostream>

#include <malloc.h>

#include "fpp_cli/commands.hpp"

int main(int argc, char** argv) {
  // Keep freed tensor buffers in the heap instead of returning them to the OS.
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  return fpp::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
