// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "scnas/cli.h"

int main(int argc, char** argv) { return scnas::run_cli(argc, argv, std::cout, std::cerr); }
