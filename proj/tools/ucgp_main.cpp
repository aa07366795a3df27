#include "ucgp/commands.hpp"

int main(int argc, char** argv) { return ucgp::run_cli(argc, argv); }
