#include "lews/cli.hpp"

int main(int argc, char** argv) { return lews::cli_main(argc, argv); }
