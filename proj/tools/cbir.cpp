#include "cbir/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return cbir::run_cli(argc, argv, std::cout, std::cerr);
}
