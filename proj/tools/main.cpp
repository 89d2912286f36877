#include "commands.hpp"

int main(int argc, char** argv) { return grid_islander::cli::run_cli(argc, argv); }
