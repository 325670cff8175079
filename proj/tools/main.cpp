#include "cli.hpp"

int main(int argc, char** argv) { return vehdet::cli_main(argc, argv); }
