#include "cli.hpp"

int main(int argc, char** argv) { return martkit::cli::run_cli(argc, argv); }
