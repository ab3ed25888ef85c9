#include "carbon/cli.hpp"

int main(int argc, char** argv) { return carbon::cli_main(argc, argv); }
