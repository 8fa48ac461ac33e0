#include "coulomb_hbt/cli.hpp"

int main(int argc, char** argv) { return coulomb_hbt::cli::run(argc, argv); }
