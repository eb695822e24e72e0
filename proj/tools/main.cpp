#include "dsfsum/cli.hpp"

int main(int argc, char** argv) { return dsf::cli::run(argc, argv); }
