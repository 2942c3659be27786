// SPDX-License-Identifier: Apache-2.0
#include "hca/cli.hpp"

int main(int argc, char** argv) { return hca::run_cli(argc, argv); }
