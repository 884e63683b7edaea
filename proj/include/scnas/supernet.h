// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scnas/graph.h"
#include "scnas/parameters.h"
#include "scnas/space.h"

namespace scnas {

// Maximal weights shared by every sub-network of a search space.
//
// Per stage s and repeat slot r the supernet holds
//   s<s>.r<r>.conv.w  [C_max x C_in_max x K_max]
//   s<s>.r<r>.conv.b  [C_max]
//   s<s>.r<r>.norm.g  [C_max]
//   s<s>.r<r>.norm.b  [C_max]
// and a head (head.w [classes x C_max], head.b [classes]). A sub-network
// uses the first-c output channels, the first-c_in input channels, the first
// r repeat slots and the centered K-window of each kernel; when K_max - K is
// odd the window sits one tap to the left of center.
//
// A standalone model is a Supernet over a singleton space, so the same
// forward code serves both.
class Supernet {
 public:
  Supernet(SearchSpace space, std::uint64_t seed);
  // Adopts existing weights; throws if any tensor is missing or misshapen.
  Supernet(SearchSpace space, ParameterSet<float> params);

  const SearchSpace& space() const { return space_; }
  const ParameterSet<float>& params() const { return params_; }
  ParameterSet<float>& params() { return params_; }

  // Records the sub-network forward for one mono example; returns logits.
  Var forward(Graph<float>& graph, const SubnetConfig& config,
              std::span<const float> input) const;

  // Inference without gradient bookkeeping.
  std::vector<float> logits(const SubnetConfig& config, std::span<const float> input) const;

  // Standalone copy of the active slices of `config`.
  Supernet extract(const SubnetConfig& config) const;

  // Number of weights the config actually uses.
  std::size_t parameter_count(const SubnetConfig& config) const;

  // For singleton spaces: the one config.
  SubnetConfig only_config() const;

  static std::string conv_w(std::size_t stage, int slot);
  static std::string conv_b(std::size_t stage, int slot);
  static std::string norm_g(std::size_t stage, int slot);
  static std::string norm_b(std::size_t stage, int slot);

 private:
  void check_layout() const;
  int slot_in_channels(std::size_t stage, int slot) const;

  SearchSpace space_;
  ParameterSet<float> params_;
};

// Offset of a K-tap window inside a K_max-tap kernel.
inline int kernel_window_offset(int k_max, int k) { return (k_max - k) / 2; }

}  // namespace scnas
