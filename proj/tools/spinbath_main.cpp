#include "spinbath/runner.hpp"

int main(int argc, char** argv) { return spinbath::cli_main(argc, argv); }
