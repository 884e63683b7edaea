// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scnas/tensor.h"

namespace scnas {

// Named trainable tensors. Indices are stable once registered.
template <typename T>
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor<T> value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index(const std::string& name) const;

  std::size_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
  std::map<std::string, std::size_t> by_name_;
};

// Gradient accumulators shadowing a ParameterSet. `touched` marks the entries
// that received a contribution since the last reset (they may still be zero);
// optimizers update only touched entries so that weights outside the active
// sub-network slice stay bit-identical.
template <typename T>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet<T>& params);

  std::size_t size() const { return grads_.size(); }
  Tensor<T>& grad(std::size_t i) { return grads_.at(i); }
  const Tensor<T>& grad(std::size_t i) const { return grads_.at(i); }
  std::vector<std::uint8_t>& touched(std::size_t i) { return touched_.at(i); }
  const std::vector<std::uint8_t>& touched(std::size_t i) const {
    return touched_.at(i);
  }

  void zero();
  // Adds `other` into this buffer; touched masks are OR-ed.
  void accumulate(const Gradients& other);

 private:
  std::vector<Tensor<T>> grads_;
  std::vector<std::vector<std::uint8_t>> touched_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;

}  // namespace scnas
