#include "drex/runner.hpp"

int main(int argc, char** argv) { return drex::run_cli(argc, argv); }
