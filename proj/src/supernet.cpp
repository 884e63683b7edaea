// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/supernet.h"

#include <cmath>
#include <stdexcept>

#include "scnas/random.h"

namespace scnas {

std::string Supernet::conv_w(std::size_t stage, int slot) {
  return "s" + std::to_string(stage + 1) + ".r" + std::to_string(slot + 1) + ".conv.w";
}
std::string Supernet::conv_b(std::size_t stage, int slot) {
  return "s" + std::to_string(stage + 1) + ".r" + std::to_string(slot + 1) + ".conv.b";
}
std::string Supernet::norm_g(std::size_t stage, int slot) {
  return "s" + std::to_string(stage + 1) + ".r" + std::to_string(slot + 1) + ".norm.g";
}
std::string Supernet::norm_b(std::size_t stage, int slot) {
  return "s" + std::to_string(stage + 1) + ".r" + std::to_string(slot + 1) + ".norm.b";
}

int Supernet::slot_in_channels(std::size_t stage, int slot) const {
  if (slot > 0) return space_.stages[stage].max_channels();
  return stage == 0 ? space_.input_channels : space_.stages[stage - 1].max_channels();
}

Supernet::Supernet(SearchSpace space, std::uint64_t seed) : space_(std::move(space)) {
  validate_space(space_);
  std::mt19937_64 rng(derive_seed(seed, 0x5eed));
  for (std::size_t s = 0; s < space_.stages.size(); ++s) {
    const auto& st = space_.stages[s];
    const std::size_t c = static_cast<std::size_t>(st.max_channels());
    const std::size_t k = static_cast<std::size_t>(st.max_kernel());
    for (int r = 0; r < st.max_repeats(); ++r) {
      const std::size_t c_in = static_cast<std::size_t>(slot_in_channels(s, r));
      Tensor<float> w(Shape{c, c_in, k});
      const double std_dev = std::sqrt(2.0 / static_cast<double>(c_in * k));
      for (auto& v : w.vec()) v = static_cast<float>(std_dev * normal(rng));
      params_.add(conv_w(s, r), std::move(w));
      params_.add(conv_b(s, r), Tensor<float>(Shape{c}, 0.0f));
      // Shortcut blocks start as the identity.
      params_.add(norm_g(s, r), Tensor<float>(Shape{c}, r == 0 ? 1.0f : 0.0f));
      params_.add(norm_b(s, r), Tensor<float>(Shape{c}, 0.0f));
    }
  }
  const std::size_t c_last = static_cast<std::size_t>(space_.stages.back().max_channels());
  const std::size_t n = static_cast<std::size_t>(space_.num_classes);
  Tensor<float> hw(Shape{n, c_last});
  const double head_std = 1.0 / std::sqrt(static_cast<double>(c_last));
  for (auto& v : hw.vec()) v = static_cast<float>(head_std * normal(rng));
  params_.add("head.w", std::move(hw));
  params_.add("head.b", Tensor<float>(Shape{n}, 0.0f));
}

Supernet::Supernet(SearchSpace space, ParameterSet<float> params)
    : space_(std::move(space)), params_(std::move(params)) {
  validate_space(space_);
  check_layout();
}

void Supernet::check_layout() const {
  auto expect = [&](const std::string& name, const Shape& shape) {
    const auto idx = params_.find(name);
    if (!idx) throw std::invalid_argument("supernet: missing tensor '" + name + "'");
    if (params_.value(*idx).shape() != shape) {
      throw std::invalid_argument("supernet: tensor '" + name + "' has shape " +
                                  shape_str(params_.value(*idx).shape()) + ", expected " +
                                  shape_str(shape));
    }
  };
  std::size_t expected = 2;
  for (std::size_t s = 0; s < space_.stages.size(); ++s) {
    const auto& st = space_.stages[s];
    const std::size_t c = static_cast<std::size_t>(st.max_channels());
    for (int r = 0; r < st.max_repeats(); ++r) {
      expect(conv_w(s, r), {c, static_cast<std::size_t>(slot_in_channels(s, r)),
                            static_cast<std::size_t>(st.max_kernel())});
      expect(conv_b(s, r), {c});
      expect(norm_g(s, r), {c});
      expect(norm_b(s, r), {c});
      expected += 4;
    }
  }
  const std::size_t n = static_cast<std::size_t>(space_.num_classes);
  expect("head.w", {n, static_cast<std::size_t>(space_.stages.back().max_channels())});
  expect("head.b", {n});
  if (params_.size() != expected) {
    throw std::invalid_argument("supernet: unexpected extra tensors in parameter set");
  }
}

Var Supernet::forward(Graph<float>& g, const SubnetConfig& config,
                      std::span<const float> input) const {
  if (!is_member(config, space_)) {
    throw std::invalid_argument("config " + to_string(config) + " is not in the search space");
  }
  const std::size_t need = min_input_length(config, space_);
  if (input.size() < need) {
    // Name the first stage that runs out of samples.
    std::size_t len = input.size();
    for (const auto& layer : layer_plan(config, space_)) {
      if (len < static_cast<std::size_t>(layer.kernel)) {
        throw std::invalid_argument(
            "input of " + std::to_string(input.size()) + " samples is too short: stage " +
            std::to_string(layer.stage + 1) + " (repeat " + std::to_string(layer.slot + 1) +
            ") receives " + std::to_string(len) + " frames for kernel " +
            std::to_string(layer.kernel) + "; minimum input length is " + std::to_string(need));
      }
      len = conv_output_length(len, static_cast<std::size_t>(layer.kernel),
                               static_cast<std::size_t>(layer.stride));
    }
  }
  const std::size_t c0 = static_cast<std::size_t>(space_.input_channels);
  if (input.size() % c0 != 0) throw std::invalid_argument("input size not divisible by channels");
  Var x = g.constant(Tensor<float>(Shape{c0, input.size() / c0},
                                   std::vector<float>(input.begin(), input.end())));
  std::size_t prev = c0;
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    const auto& st = space_.stages[s];
    const auto& ch = config.stages[s];
    const std::size_t c = static_cast<std::size_t>(ch.channels);
    const std::size_t k = static_cast<std::size_t>(ch.kernel);
    const std::size_t off =
        static_cast<std::size_t>(kernel_window_offset(st.max_kernel(), ch.kernel));
    for (int r = 0; r < ch.repeats; ++r) {
      const std::size_t c_in = r == 0 ? prev : c;
      const std::size_t stride = static_cast<std::size_t>(r == 0 ? st.stride : 1);
      Var w = g.parameter_slice(params_.index(conv_w(s, r)), {{0, c}, {0, c_in}, {off, k}});
      Var b = g.parameter_slice(params_.index(conv_b(s, r)), {{0, c}});
      Var gain = g.parameter_slice(params_.index(norm_g(s, r)), {{0, c}});
      Var shift = g.parameter_slice(params_.index(norm_b(s, r)), {{0, c}});
      const std::string label =
          "stage " + std::to_string(s + 1) + " repeat " + std::to_string(r + 1);
      Var y = g.channel_norm(g.conv1d(x, w, b, stride, label), gain, shift);
      if (r > 0) {
        // Identity shortcut, center-cropped to the valid-convolution output.
        const std::size_t len = g.value(y).dim(1);
        y = g.add(y, g.crop_time(x, (g.value(x).dim(1) - len) / 2, len));
      }
      x = g.relu(y);
    }
    prev = c;
  }
  Var pooled = g.global_avg_pool(x);
  const std::size_t n = static_cast<std::size_t>(space_.num_classes);
  Var hw = g.parameter_slice(params_.index("head.w"), {{0, n}, {0, prev}});
  Var hb = g.parameter(params_.index("head.b"));
  return g.affine(pooled, hw, hb);
}

std::vector<float> Supernet::logits(const SubnetConfig& config,
                                    std::span<const float> input) const {
  Graph<float> g(&params_, nullptr);
  Var out = forward(g, config, input);
  return g.value(out).vec();
}

Supernet Supernet::extract(const SubnetConfig& config) const {
  SearchSpace single = singleton_space(config, space_);
  ParameterSet<float> out;
  std::size_t prev = static_cast<std::size_t>(space_.input_channels);
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    const auto& st = space_.stages[s];
    const auto& ch = config.stages[s];
    const std::size_t c = static_cast<std::size_t>(ch.channels);
    const std::size_t k = static_cast<std::size_t>(ch.kernel);
    const std::size_t off =
        static_cast<std::size_t>(kernel_window_offset(st.max_kernel(), ch.kernel));
    for (int r = 0; r < ch.repeats; ++r) {
      const std::size_t c_in = r == 0 ? prev : c;
      const auto& w = params_.value(params_.index(conv_w(s, r)));
      Tensor<float> ws(Shape{c, c_in, k});
      for (std::size_t o = 0; o < c; ++o) {
        for (std::size_t i = 0; i < c_in; ++i) {
          for (std::size_t j = 0; j < k; ++j) ws.at(o, i, j) = w.at(o, i, off + j);
        }
      }
      out.add(conv_w(s, r), std::move(ws));
      for (const auto& name : {conv_b(s, r), norm_g(s, r), norm_b(s, r)}) {
        const auto& v = params_.value(params_.index(name));
        out.add(name, Tensor<float>(Shape{c}, std::vector<float>(v.data(), v.data() + c)));
      }
    }
    prev = c;
  }
  const std::size_t n = static_cast<std::size_t>(space_.num_classes);
  const auto& hw = params_.value(params_.index("head.w"));
  Tensor<float> hs(Shape{n, prev});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < prev; ++c) hs.at(i, c) = hw.at(i, c);
  }
  out.add("head.w", std::move(hs));
  out.add("head.b", params_.value(params_.index("head.b")));
  return Supernet(std::move(single), std::move(out));
}

std::size_t Supernet::parameter_count(const SubnetConfig& config) const {
  std::size_t n = 0;
  for (const auto& layer : layer_plan(config, space_)) {
    const std::size_t c_out = static_cast<std::size_t>(layer.c_out);
    n += c_out * static_cast<std::size_t>(layer.c_in) * static_cast<std::size_t>(layer.kernel);
    n += 3 * c_out;
  }
  const std::size_t classes = static_cast<std::size_t>(space_.num_classes);
  n += classes * static_cast<std::size_t>(config.stages.back().channels) + classes;
  return n;
}

SubnetConfig Supernet::only_config() const {
  if (space_cardinality(space_) != 1) {
    throw std::logic_error("only_config: search space has more than one member");
  }
  return max_config(space_);
}

}  // namespace scnas
