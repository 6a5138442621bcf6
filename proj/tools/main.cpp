#include <iostream>
#include <string>
#include <vector>

#include "app.hpp"

int main(int argc, char** argv) {
  return gcos::app::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
