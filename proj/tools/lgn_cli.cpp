#include "lgn/cli.hpp"

int main(int argc, char** argv) { return lgn::cli::dispatch(argc, argv); }
