#include <iostream>

#include "mrtts/cli.hpp"

int main(int argc, char** argv) { return mrtts::run_cli(argc, argv, std::cout, std::cerr); }
