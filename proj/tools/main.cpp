#include "gfv/cli.hpp"

int main(int argc, char** argv) {
  return gfv::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
