#include "dyncontract/cli.hpp"

int main(int argc, char** argv) { return dyncontract::cli::main(argc, argv); }
