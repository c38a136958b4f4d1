#include "vpagent/cli.hpp"

int main(int argc, char** argv) { return vpa::cli_dispatch(argc, argv); }
