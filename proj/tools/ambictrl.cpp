#include "ambictrl/cli.hpp"

int main(int argc, char** argv) { return ambictrl::cli::main(argc, argv); }
