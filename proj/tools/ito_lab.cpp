#include "itolab/cli.hpp"

int main(int argc, char** argv) { return itolab::run_cli(argc, argv); }
