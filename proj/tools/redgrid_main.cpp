#include "redgrid/cli.hpp"

int main(int argc, char** argv) { return redgrid::cli_main(argc, argv); }
