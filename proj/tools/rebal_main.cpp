#include <string>
#include <vector>

#include "rebal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rebal::cli::run(args);
}
