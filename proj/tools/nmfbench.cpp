#include <iostream>

#include "nmf/bench/cli.hpp"

int main(int argc, char** argv) { return nmf::bench::run_cli(argc, argv, std::cout, std::cerr); }
