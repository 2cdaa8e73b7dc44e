#include <iostream>

#include "gmr/cli.hpp"

int main(int argc, char** argv) { return gmr::cli::run(argc, argv, std::cout, std::cerr); }
