#include <iostream>

#include "lada/cli/commands.hpp"

int main(int argc, char** argv) { return lada::cli::run_cli(argc, argv, std::cout, std::cerr); }
