#include "n3map/commands.hpp"

int main(int argc, char** argv) { return n3map::run_cli(argc, argv); }
