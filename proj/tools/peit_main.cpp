#include "peit/cli.hpp"

int main(int argc, char** argv) { return peit::cli_main(argc, argv); }
