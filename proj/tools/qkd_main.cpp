#include "qkd/cli.hpp"

int main(int argc, char** argv) { return qkd::cli::main(argc, argv); }
