#include <string>
#include <vector>

#include "wpc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wpc::cli::run(std::move(args));
}
