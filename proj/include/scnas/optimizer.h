// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "scnas/parameters.h"

namespace scnas {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Plain:    w <- w - lr * g
// Adaptive: m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
//           w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Only entries flagged in Gradients::touched are read or written, so slices
// of a shared weight that the current sub-network does not use keep both
// their value and their moments.
template <typename T>
class Optimizer {
 public:
  Optimizer(const ParameterSet<T>& params, OptimizerConfig config);

  void step(ParameterSet<T>& params, const Gradients<T>& grads);

  const OptimizerConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step_count() const { return steps_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }

  // Moment buffers, same layout as the parameters (empty for plain mode).
  Tensor<T>& first_moment(std::size_t i) { return m_.at(i); }
  Tensor<T>& second_moment(std::size_t i) { return v_.at(i); }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }
  std::size_t moment_count() const { return m_.size(); }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace scnas
