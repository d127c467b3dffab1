#include <vector>

#include "ecqt/cli.hpp"

int main(int argc, char** argv) {
  return ecqt::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
