#include "cli.hpp"

int main(int argc, char** argv) { return pml::cli::run(argc, argv); }
