#include "narx_comp_cli.hpp"

int main(int argc, char** argv) { return narxcomp::cli::run_cli(argc, argv); }
