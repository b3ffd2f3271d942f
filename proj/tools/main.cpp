#include <iostream>

#include "equin/cli.hpp"

int main(int argc, char** argv) { return equin::cli::run(argc, argv, std::cout, std::cerr); }
