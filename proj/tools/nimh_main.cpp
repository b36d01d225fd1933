#include "nimh/cli.hpp"

int main(int argc, char** argv) {
    return nimh::run_cli(argc, argv);
}
