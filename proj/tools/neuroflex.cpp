// Command line entry point. Subcommands are registered in cli.hpp so the
// test suite can drive them in process.

#include "neuroflex/cli.hpp"

int main(int argc, char** argv) {
    return neuroflex::cli_main(argc, argv);
}
