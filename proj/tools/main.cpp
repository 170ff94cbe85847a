#include <cstdlib>
#include <iostream>

#include "cli.hpp"

extern char** environ;

int main(int argc, char** argv) {
    harvestkit::cli::Environment env;
    for (char** e = environ; *e; ++e) {
        std::string kv(*e);
        if (auto eq = kv.find('='); eq != std::string::npos) env.vars.emplace(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return harvestkit::cli::run({argv + 1, argv + argc}, env, std::cout, std::cerr);
}
