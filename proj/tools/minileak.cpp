#include <iostream>

#include "minileak/cli.hpp"

int main(int argc, char** argv) { return minileak::cli::run_cli(argc, argv, std::cout, std::cerr); }
