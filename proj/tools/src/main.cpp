#include <iostream>

#include "sbf_cli/cli.hpp"

int main(int argc, char** argv) { return sbf::cli::run(argc, argv, std::cout, std::cerr); }
