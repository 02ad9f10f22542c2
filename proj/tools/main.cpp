#include "ecgkit/cli_app.hpp"

int main(int argc, char** argv) { return ecg::cli_run(argc, argv); }
