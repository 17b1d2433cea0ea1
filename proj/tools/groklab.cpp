#include "groklab/cli.hpp"

int main(int argc, char** argv) { return groklab::cli_main(argc, argv); }
