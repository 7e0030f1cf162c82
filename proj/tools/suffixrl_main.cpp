#include "suffixrl/harness.hpp"

int main(int argc, char** argv) { return suffixrl::run_command(argc, argv); }
