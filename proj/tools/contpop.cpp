#include "contpop/cli.hpp"

int main(int argc, char** argv) { return contpop::cli::run(argc, argv); }
