// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hca {

/// Entry point for the hcanet tool. Exit codes: 0 ok, 1 runtime failure, 2 usage.
int run_cli(int argc, char** argv);

}  // namespace hca
