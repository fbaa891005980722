#include "paint/cli/cli.hpp"

int main(int argc, char** argv) { return paint::cli::run(argc, argv); }
