#include "orlab/harness.hpp"

int main(int argc, char** argv) {
    return orlab::cli_main(argc, argv);
}
