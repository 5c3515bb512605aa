#include <iostream>

#include "bpe/cli.hpp"

int main(int argc, char** argv) { return bpe::run_cli(argc, argv, std::cout, std::cerr); }
