#include <iostream>
#include <string>
#include <vector>

#include "airy_ldp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return airy_ldp::cli::run(args, std::cout, std::cerr);
}
