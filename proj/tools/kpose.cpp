#include <iostream>

#include "kpose/cli.hpp"

int main(int argc, char** argv) { return kpose::run_cli(argc, argv, std::cout, std::cerr); }
