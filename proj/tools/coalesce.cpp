#include <iostream>
#include <string>
#include <vector>

#include "coalesce/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return coalesce::cli::run(args, std::cout, std::cerr);
}
