#include <iostream>

#include "kpp/cli.hpp"

int main(int argc, char** argv) { return kpp::run_cli(argc, argv, std::cout, std::cerr); }
