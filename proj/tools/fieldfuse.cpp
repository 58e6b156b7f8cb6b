#include "fieldfuse/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return fieldfuse::run_cli(args);
}
