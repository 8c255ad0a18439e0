#include "protoverb/cli.hpp"

int main(int argc, char** argv) { return protoverb::cli::run(argc, argv); }
