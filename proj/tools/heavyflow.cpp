#include "heavyflow/cli.hpp"

int main(int argc, char** argv) { return heavyflow::run_cli(argc, argv); }
