#include "searn/cli.hpp"

int main(int argc, char** argv) { return searn::cli::cli_main(argc, argv); }
