#include <string>
#include <vector>

#include "kfs/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return kfs::cli::run(args);
}
