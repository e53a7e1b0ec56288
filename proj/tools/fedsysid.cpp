#include "fedsysid/experiments/cli.hpp"

int main(int argc, char** argv) { return fedsysid::experiments::cli_main(argc, argv); }
