#include <string>
#include <vector>

#include <gratis/cli.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gratis::run_cli(args);
}
