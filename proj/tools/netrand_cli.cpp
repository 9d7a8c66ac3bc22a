// CLI front end; subcommands are wired in cli.hpp.
#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::printf("netrand_cli: under construction\n");
    return 0;
}
