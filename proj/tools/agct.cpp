#include "agct/cli/commands.hpp"

int main(int argc, char** argv) { return agct::cli::dispatch(argc, argv); }
