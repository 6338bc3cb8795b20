#include "scert/cli.hpp"

int main(int argc, char** argv) { return scert::run_cli(argc, argv); }
