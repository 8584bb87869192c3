// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return svox::run_cli(argc, argv, std::cout, std::cerr);
}
