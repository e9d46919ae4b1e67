#include "qcreg/cli.hpp"

int main(int argc, char **argv) { return qcreg::cli_main(argc, argv); }
