#include "mmsim/cli.h"

#include <iostream>

int main(int argc, char** argv) { return mmsim::cli::main(argc, argv, std::cout, std::cerr); }
