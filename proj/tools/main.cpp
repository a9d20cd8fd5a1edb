#include "cli.hpp"

int main(int argc, char** argv) { return robust_mimo::cli::run(argc, argv); }
