#include "lmdiv/cli.hpp"

int main(int argc, char** argv) { return lmdiv::cli::run(argc, argv); }
