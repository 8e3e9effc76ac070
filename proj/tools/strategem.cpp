#include "commands.hpp"

int main(int argc, char** argv) { return strategem::cli::run(argc, argv); }
