#include <string>
#include <vector>

#include "pats/cli.hpp"

int main(int argc, char** argv) {
    return pats::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
