#include "pxm/cli/commands.hpp"

int main(int argc, char** argv) { return pxm::cli::run(argc, argv); }
