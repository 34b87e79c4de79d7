#include "homoenc/cli/cli.hpp"

int main(int argc, char** argv) { return homoenc::cli::run(argc, argv); }
