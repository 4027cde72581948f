#include <iostream>

#include "tolerant/cli.hpp"

int main(int argc, char** argv) { return tolerant::cli::run(argc, argv, std::cout, std::cerr); }
