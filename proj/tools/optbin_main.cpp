#include "optbin/experiment.hpp"

int main(int argc, char** argv) { return optbin::run_cli(argc, argv); }
