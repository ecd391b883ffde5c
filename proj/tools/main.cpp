#include <string>
#include <vector>

#include "polifuse/cli.hpp"

int main(int argc, char** argv) {
  return polifuse::run(std::vector<std::string>(argv + 1, argv + argc));
}
