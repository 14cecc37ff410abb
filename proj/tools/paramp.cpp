#include <iostream>

#include "paramp/cli.hpp"

int main(int argc, char** argv) { return paramp::cli::run(argc, argv, std::cout, std::cerr); }
