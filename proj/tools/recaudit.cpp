#include "recaudit/cli.hpp"

int main(int argc, char** argv) { return recaudit::run_cli(argc, argv); }
