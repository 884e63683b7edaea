// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/optimizer.h"

#include <cmath>
#include <stdexcept>

namespace scnas {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

template <typename T>
Optimizer<T>::Optimizer(const ParameterSet<T>& params, OptimizerConfig config)
    : config_(config) {
  if (!(config_.learning_rate > 0)) {
    throw std::invalid_argument("optimizer: learning rate must be positive");
  }
  if (config_.kind == OptimizerKind::kAdam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params.value(i).shape());
      v_.emplace_back(params.value(i).shape());
    }
  }
}

template <typename T>
void Optimizer<T>::step(ParameterSet<T>& params, const Gradients<T>& grads) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("optimizer: gradient buffer does not match parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& g = grads.grad(p);
    if (g.shape() != params.value(p).shape()) {
      throw std::invalid_argument("optimizer: gradient shape mismatch for '" +
                                  params.name(p) + "'");
    }
    if (!g.all_finite()) {
      throw std::runtime_error("optimizer: non-finite gradient in parameter '" +
                               params.name(p) + "'");
    }
  }
  ++steps_;
  const T lr = static_cast<T>(config_.learning_rate);
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& w = params.value(p);
      const auto& g = grads.grad(p);
      const auto& mask = grads.touched(p);
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (mask[i]) w[i] -= lr * g[i];
      }
    }
    return;
  }
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T eps = static_cast<T>(config_.epsilon);
  const double t = static_cast<double>(steps_);
  const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params.value(p);
    auto& m = m_[p];
    auto& v = v_[p];
    const auto& g = grads.grad(p);
    const auto& mask = grads.touched(p);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask[i]) continue;
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace scnas
