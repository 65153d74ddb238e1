// SPDX-License-Identifier: Apache-2.0
#include "mxplus/cli.hpp"

int main(int argc, char** argv) { return mx::cli::run(argc, argv); }
