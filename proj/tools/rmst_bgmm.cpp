#include "rmst/cli.hpp"

int main(int argc, char** argv) { return rmst::cli_main(argc, argv); }
