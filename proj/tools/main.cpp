#include <iostream>
#include <string>
#include <vector>

#include "modefuse/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return modefuse::run_cli(args, std::cout, std::cerr);
}
