// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace scnas {

inline constexpr int kNumClasses = 6;

// Choices for one stage of stacked 1-D convolutions.
struct StageSpec {
  std::vector<int> channels;
  std::vector<int> repeats;
  std::vector<int> kernels;
  int stride = 1;

  int max_channels() const { return channels.back(); }
  int max_repeats() const { return repeats.back(); }
  int max_kernel() const { return kernels.back(); }
  bool operator==(const StageSpec&) const = default;
};

struct SearchSpace {
  std::vector<StageSpec> stages;
  int input_channels = 1;
  int num_classes = kNumClasses;
  bool operator==(const SearchSpace&) const = default;
};

struct StageChoice {
  int channels = 0;
  int repeats = 0;
  int kernel = 0;
  bool operator==(const StageChoice&) const = default;
  auto operator<=>(const StageChoice&) const = default;
};

// One architecture: a choice per stage. Flat encoding is three choice
// indices per stage (channels, repeats, kernel).
struct SubnetConfig {
  std::vector<StageChoice> stages;
  bool operator==(const SubnetConfig&) const = default;
  auto operator<=>(const SubnetConfig&) const = default;
};

// One convolution as executed: repeat slot 0 of a stage carries the stage
// stride and maps the previous stage's width to this stage's width; later
// slots are stride-1 and width-preserving.
struct LayerSpec {
  int stage = 0;
  int slot = 0;
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  int stride = 1;
};

// Eight stages: {16,24,32} k10 s5; {32,48,64} k8 s4; {64,96,128} k4 s2 x{1,2,3};
// then {128,192,256} with kernels 1, {1,2,3}, {4,5,6}, {7,8,9}, {10,11,12}.
SearchSpace default_search_space();

// Throws std::invalid_argument on empty or non-increasing choice lists,
// non-positive values, repeats outside {1,2,3}, or a bad stride.
void validate_space(const SearchSpace& space);

std::uint64_t space_cardinality(const SearchSpace& space);

SubnetConfig min_config(const SearchSpace& space);
SubnetConfig max_config(const SearchSpace& space);
bool is_member(const SubnetConfig& config, const SearchSpace& space);

std::vector<int> encode(const SubnetConfig& config, const SearchSpace& space);
SubnetConfig decode(const std::vector<int>& genes, const SearchSpace& space);
std::string encoding_key(const std::vector<int>& genes);

// "c:r:k/c:r:k/..." one group per stage.
std::string to_string(const SubnetConfig& config);
SubnetConfig parse_config(const std::string& text);

// Line-oriented form used inside checkpoints and run directories.
std::string space_to_text(const SearchSpace& space);
SearchSpace space_from_text(const std::string& text);

std::vector<LayerSpec> layer_plan(const SubnetConfig& config, const SearchSpace& space);

// Smallest input length for which every convolution of the config produces
// at least one output frame.
std::size_t min_input_length(const SubnetConfig& config, const SearchSpace& space);

using ConfigFilter = std::function<bool(const SubnetConfig&)>;

inline constexpr int kMaxSampleRetries = 1000;

// Draws every gene independently and uniformly; retries while `accept`
// rejects, throwing "constraint infeasible" after kMaxSampleRetries draws.
SubnetConfig sample_uniform(const SearchSpace& space, std::mt19937_64& rng,
                            const ConfigFilter& accept = {});

// All configs in lexicographic gene order. Throws if the cardinality is
// above `cap`.
std::vector<SubnetConfig> enumerate_space(const SearchSpace& space, std::uint64_t cap);

// Singleton space whose only member is `config`; used for standalone models.
SearchSpace singleton_space(const SubnetConfig& config, const SearchSpace& space);

}  // namespace scnas
