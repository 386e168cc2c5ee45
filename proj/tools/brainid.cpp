#include "brainid/cli.hpp"

int main(int argc, char** argv) { return brainid::run_cli(argc, argv); }
