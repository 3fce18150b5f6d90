#include "tsctm/cli.hpp"

int main(int argc, char** argv) { return tsctm::cli::run(argc, argv); }
