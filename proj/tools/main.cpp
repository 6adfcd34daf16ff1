#include "owl/cli.hpp"

int main(int argc, char** argv) { return owl::cli::main_entry(argc, argv); }
