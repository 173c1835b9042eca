// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "pairwise_vl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pairwise_vl::run_cli(args, std::cout, std::cerr);
}
