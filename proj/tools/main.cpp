#include "mpt/experiment.hpp"

int main(int argc, char** argv) { return mpt::run_cli(argc, argv); }
