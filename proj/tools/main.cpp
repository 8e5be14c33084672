#include <iostream>

#include "cascadegate/cli.hpp"

int main(int argc, char** argv) { return cascadegate::run_cli(argc, argv, std::cout, std::cerr); }
