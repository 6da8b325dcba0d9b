#include <iostream>

#include "bilo/cli.hpp"

int main(int argc, char** argv) { return bilo::run_cli(argc, argv, std::cout, std::cerr); }
