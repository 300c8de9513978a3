#include "commands.hpp"

int main(int argc, char** argv) { return mmgn::cli::run_cli(argc, argv); }
