#include "dta/cli.hpp"

int main(int argc, char** argv) { return dta::run_cli(argc, argv); }
