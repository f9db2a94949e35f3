#include "escort/cli.hpp"

int main(int argc, char** argv) { return escort::cli::run(argc, argv); }
