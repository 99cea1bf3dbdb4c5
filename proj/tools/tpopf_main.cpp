#include "cli.hpp"

int main(int argc, char** argv) { return tpopf::cli::main(argc, argv); }
