#include <iostream>

#include "eventnav/cli.hpp"

int main(int argc, char** argv) { return eventnav::run_cli(argc, argv, std::cout, std::cerr); }
