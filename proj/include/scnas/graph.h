// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scnas/parameters.h"
#include "scnas/tensor.h"

namespace scnas {

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kLogEpsilon = 1e-12;

// Handle to a node recorded on a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

// Half-open window [offset, offset + length) along one dimension.
struct SliceRange {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Tape of operations for one forward pass. Nodes are recorded in execution
// order and backward() walks them in exact reverse. A graph reads parameters
// through a const ParameterSet and writes their gradients into a Gradients
// buffer it does not own, so several graphs can run over the same weights as
// long as each has its own buffer.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const ParameterSet<T>* params, Gradients<T>* grads)
      : params_(params), grads_(grads) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  // Leaf whose gradient is kept on the node (see grad()).
  Var variable(Tensor<T> value);
  Var parameter(std::size_t index);
  Var parameter_slice(std::size_t index, std::vector<SliceRange> ranges);

  // x: [C_in x L_in], w: [C_out x C_in x K], b: [C_out] -> [C_out x L_out].
  // Valid convolution; `label` names the layer in precondition errors.
  Var conv1d(Var x, Var w, Var b, std::size_t stride,
             std::string_view label = {});
  // Per-time-step normalization across channels. x: [C x L].
  Var channel_norm(Var x, Var gain, Var shift, T eps = T(kNormEpsilon));
  Var relu(Var x);
  // [C x L] -> [C x length], columns offset..offset+length-1.
  Var crop_time(Var x, std::size_t offset, std::size_t length);
  // [C x L] -> [C]
  Var global_avg_pool(Var x);
  // x: [C], w: [N x C], b: [N] -> [N]
  Var affine(Var x, Var w, Var b);

  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var sum(Var a);

  // -log softmax(logits)[label], scalar.
  Var softmax_cross_entropy(Var logits, std::size_t label);
  // KL(target || softmax(logits / temperature)), scalar. `target` must be a
  // probability vector; it is treated as a constant.
  Var kl_to_target(Var logits, std::span<const T> target, T temperature);

  const Tensor<T>& value(Var v) const;
  // Gradient of the last backward() loss w.r.t. node v. Zero-filled if v did
  // not receive any contribution.
  const Tensor<T>& grad(Var v);

  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void()> backward;
    const char* op = "";
  };

  Var record(const char* op, Tensor<T> value, std::function<void()> backward);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor<T>& grad_of(std::size_t id);

  const ParameterSet<T>* params_ = nullptr;
  Gradients<T>* grads_ = nullptr;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Gradient-free helpers shared by inference paths and tests.
template <typename T>
std::vector<T> softmax(std::span<const T> logits, T temperature = T(1));

std::size_t conv_output_length(std::size_t l_in, std::size_t kernel,
                               std::size_t stride);

// KL(p || q) over probability vectors; zero-probability entries of p
// contribute nothing and q is floored at kLogEpsilon. Throws if either input
// is not normalized within 1e-6 or has negative entries.
double kl_divergence(std::span<const double> p, std::span<const double> q);

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace scnas
