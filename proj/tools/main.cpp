#include "gravis/cli.hpp"

int main(int argc, char** argv) { return gravis::cli_main(argc, argv); }
