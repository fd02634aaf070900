#include <string>
#include <vector>

#include "cmech/cli.hpp"

int main(int argc, char** argv) {
  return cmech::run_cli(std::vector<std::string>(argv, argv + argc));
}
