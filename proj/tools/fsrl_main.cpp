#include "fsrl/cli.hpp"

int main(int argc, char** argv) { return fsrl::cli::run(argc, argv); }
