#include "cli.hpp"

int main(int argc, char** argv) { return pourbench::cli::run(argc, argv); }
