#include "cli.hpp"

int main(int argc, char** argv) { return hashtrace::cli::run(argc, argv); }
