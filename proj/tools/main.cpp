#include "flowsolve/cli.hpp"

int main(int argc, char** argv) { return flowsolve::run_cli(argc, argv); }
