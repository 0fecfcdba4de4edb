#include "synli/harness.hpp"

int main(int argc, char** argv) { return synli::run_cli(argc, argv); }
