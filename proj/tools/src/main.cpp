#include "switchdiff/tools/cli.hpp"

int main(int argc, char** argv) { return switchdiff::tools::run_cli(argc, argv); }
