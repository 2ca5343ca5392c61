#include "cli.hpp"

int main(int argc, char** argv) { return recurrence::cli::dispatch(argc, argv); }
