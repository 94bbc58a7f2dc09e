#include "ideal/cli.hpp"

int main(int argc, char** argv) { return ideal::cli::run(argc, argv); }
