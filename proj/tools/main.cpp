#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return co2occ::cli::run(argc, argv, std::cout, std::cerr); }
