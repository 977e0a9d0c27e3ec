#include <iostream>

#include "reflectrm/cli.hpp"

int main(int argc, char** argv) { return reflectrm::run_cli(argc, argv, std::cout, std::cerr); }
