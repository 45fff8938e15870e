#include "carma/cli.hpp"

int main(int argc, char** argv) { return carma::cli::run_cli(argc, argv); }
