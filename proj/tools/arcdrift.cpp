#include <string>
#include <vector>

#include "arcdrift/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return arcdrift::run_cli(args);
}
