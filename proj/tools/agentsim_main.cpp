#include "agentsim/cli.hpp"

int main(int argc, char** argv) { return agentsim::cli_main(argc, argv); }
