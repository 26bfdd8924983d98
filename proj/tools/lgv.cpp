#include "lgv/harness.hpp"

int main(int argc, char** argv) { return lgv::run_cli(argc, argv); }
