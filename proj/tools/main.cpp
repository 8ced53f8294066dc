#include "perihelion/cli.hpp"

int main(int argc, char **argv) { return perihelion::cli::run(argc, argv); }
