// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scnas/parameters.h"

namespace scnas {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;

template <typename T>
std::size_t ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (by_name_.count(name)) {
    throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  const std::size_t idx = values_.size();
  by_name_.emplace(name, idx);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return idx;
}

template <typename T>
std::optional<std::size_t> ParameterSet<T>::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::index(const std::string& name) const {
  auto idx = find(name);
  if (!idx) throw std::out_of_range("unknown parameter '" + name + "'");
  return *idx;
}

template <typename T>
std::size_t ParameterSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

template <typename T>
Gradients<T>::Gradients(const ParameterSet<T>& params) {
  grads_.reserve(params.size());
  touched_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads_.emplace_back(params.value(i).shape());
    touched_.emplace_back(params.value(i).size(), std::uint8_t{0});
  }
}

template <typename T>
void Gradients<T>::zero() {
  for (auto& g : grads_) g.fill(T(0));
  for (auto& t : touched_) std::fill(t.begin(), t.end(), std::uint8_t{0});
}

template <typename T>
void Gradients<T>::accumulate(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) {
    throw std::invalid_argument("gradient buffers of different layouts");
  }
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto& dst = grads_[p];
    const auto& src = other.grads_[p];
    auto& dt = touched_[p];
    const auto& st = other.touched_[p];
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (st[i]) {
        dst[i] += src[i];
        dt[i] = 1;
      }
    }
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Gradients<float>;
template class Gradients<double>;

}  // namespace scnas
