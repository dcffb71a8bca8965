#include "triplex/cli.hpp"

int main(int argc, char** argv) { return triplex::cli::run(argc, argv); }
