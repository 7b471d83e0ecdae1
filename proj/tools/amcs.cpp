#include "amcs/cli.hpp"

int main(int argc, char** argv) { return amcs::cli::run(argc, argv); }
