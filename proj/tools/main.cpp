#include "ppsynth/cli.hpp"

int main(int argc, char** argv) { return ppsynth::cli::run_cli(argc, argv); }
