#include <iostream>

#include "brwlab/cli.hpp"

int main(int argc, char** argv) { return brwlab::run_cli(argc, argv, std::cout, std::cerr); }
