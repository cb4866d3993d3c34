#include "cli.hpp"

int main(int argc, char** argv) { return fdelab::cli::run_cli(argc, argv); }
