#include <string>
#include <vector>

#include "viscid/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return viscid::app::run_command(args);
}
