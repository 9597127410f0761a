#include <iostream>

#include "ctk/cli.hpp"

int main(int argc, char** argv) { return ctk::run_command(argc, argv, std::cout, std::cerr); }
