#include "perpetual/cli.hpp"

int main(int argc, char** argv) { return perpetual::cli::main(argc, argv); }
