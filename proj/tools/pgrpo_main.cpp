#include "pgrpo/cli.hpp"

int main(int argc, char** argv) { return pgrpo::run_cli(argc, argv); }
