#include "wela/experiments.hpp"

int main(int argc, char** argv) { return wela::cli_main(argc, argv); }
