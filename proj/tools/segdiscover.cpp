#include <iostream>

#include "segdiscover/cli/commands.hpp"

int main(int argc, char** argv) { return segdiscover::run_cli(argc, argv, std::cout, std::cerr); }
