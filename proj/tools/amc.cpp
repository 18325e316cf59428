#include <iostream>

#include "amc/cli.hpp"

int main(int argc, char** argv) { return amc::cli::run(argc, argv, std::cout, std::cerr); }
