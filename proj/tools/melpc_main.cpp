#include "melpc/cli.hpp"

int main(int argc, char** argv) { return melpc::cli::run_cli(argc, argv); }
