#include <string>
#include <vector>

#include "ingram/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return ingram::run_cli(args);
}
