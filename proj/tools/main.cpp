#include "ica_lab/cli.hpp"

int main(int argc, char** argv) { return ica_lab::run_cli(argc, argv); }
