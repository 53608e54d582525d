// corrfit.cpp — CLI entry point

#include "corrfit/cli_app.hpp"

int main(int argc, char** argv) { return corrfit::cli::run(argc, argv); }
