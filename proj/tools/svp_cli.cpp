#include "svp/cli.hpp"

int main(int argc, char** argv) { return svp::cli_dispatch(argc, argv); }
