#include <iostream>

#include "fpension/cli.hpp"

int main(int argc, char** argv) { return fpension::run_cli(argc, argv, std::cout, std::cerr); }
