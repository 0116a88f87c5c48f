#include "searchlab/cli.hpp"

int main(int argc, char** argv) { return searchlab::cli_main(argc, argv); }
