#include <string>
#include <vector>

#include "rieszlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rieszlab::run_cli(args);
}
