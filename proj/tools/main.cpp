#include "planepose/cli.hpp"

int main(int argc, char** argv) { return planepose::cli::run(argc, argv); }
