#include "ppx/cli.hpp"

int main(int argc, char** argv) { return ppx::cli::run(argc, argv); }
