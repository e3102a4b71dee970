#include "hdclt/harness.hpp"

int main(int argc, char** argv) { return hdclt::cli_main(argc, argv); }
