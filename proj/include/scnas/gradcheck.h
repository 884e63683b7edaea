// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scnas {

struct OpGradCheck {
  std::string op;
  int cases = 0;
  int failures = 0;
  // Worst ||analytic - numeric|| / (||analytic|| + ||numeric||) over cases.
  double max_rel_error = 0;
};

// Central-difference checks of every differentiable graph operator in 64-bit
// precision on `cases` random shapes each.
std::vector<OpGradCheck> run_gradcheck(std::uint64_t seed, int cases = 20,
                                       double tolerance = 1e-4);

}  // namespace scnas
