#include "pufkit/cli.hpp"

int main(int argc, char** argv) {
    return pufkit::run_cli(argc, argv);
}
