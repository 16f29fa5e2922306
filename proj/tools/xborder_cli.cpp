// Command-line front end; see include/xborder/cli_io.hpp for the commands
// and the exit-code contract.

#include "xborder/cli_io.hpp"

int main(int argc, char** argv) { return xborder::dispatch(argc, argv); }
