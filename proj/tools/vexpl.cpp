#include "vexpl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return vexpl::cli::run(argc, argv, std::cout, std::cerr); }
