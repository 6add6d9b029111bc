#include "bvsmiss/cli.hpp"

int main(int argc, char** argv) { return bvsmiss::cli_main(argc, argv); }
