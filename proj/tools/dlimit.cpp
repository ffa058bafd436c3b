#include "dlimit/cli.hpp"

int main(int argc, char** argv) { return dlimit::cli::run(argc, argv); }
