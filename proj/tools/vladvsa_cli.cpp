#include "vladvsa/cli.hpp"

int main(int argc, char** argv) { return vladvsa::cli_main(argc, argv); }
