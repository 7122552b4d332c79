#include "qareply/cli.hpp"

int main(int argc, char** argv) { return qareply::cli::run(argc, argv); }
