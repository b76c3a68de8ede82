#include "nlpot/cli.hpp"

int main(int argc, char** argv) { return nlpot::cli::main(argc, argv); }
