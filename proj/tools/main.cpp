#include "nsls/cli.hpp"

int main(int argc, char** argv) { return nsls::cli_main(argc, argv); }
