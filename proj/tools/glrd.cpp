#include <iostream>
#include <string>
#include <vector>

#include "glrd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return glrd::cli::run(args, std::cout, std::cerr);
}
