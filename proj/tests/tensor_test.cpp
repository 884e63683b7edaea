// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "scnas/gradcheck.h"
#include "scnas/graph.h"
#include "scnas/optimizer.h"
#include "scnas/random.h"

namespace scnas {
namespace {

template <typename T>
Tensor<T> random_tensor(std::mt19937_64& rng, Shape shape) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.vec()) v = static_cast<T>(uniform(rng, -1, 1));
  return t;
}

// Naive loop oracle, accumulated in double.
Tensor<double> naive_conv(const Tensor<float>& x, const Tensor<float>& w, const Tensor<float>& b,
                          std::size_t stride) {
  const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2), l = x.dim(1);
  const std::size_t lo = (l - k) / stride + 1;
  Tensor<double> y({co, lo});
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t t = 0; t < lo; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < ci; ++c) {
        for (std::size_t j = 0; j < k; ++j) acc += double(w.at(o, c, j)) * x.at(c, t * stride + j);
      }
      y.at(o, t) = acc;
    }
  }
  return y;
}

Tensor<float> conv(const Tensor<float>& x, const Tensor<float>& w, const Tensor<float>& b,
                   std::size_t stride) {
  Graph<float> g;
  return g.value(g.conv1d(g.variable(x), g.variable(w), g.variable(b), stride));
}

TEST(Conv1d, HandExample) {
  const auto y = conv(Tensor<float>({1, 4}, {1, 2, 3, 4}), Tensor<float>({1, 1, 3}, {1, 0, -1}),
                      Tensor<float>({1}), 1);
  ASSERT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_FLOAT_EQ(y[0], -2);
  EXPECT_FLOAT_EQ(y[1], -2);
}

TEST(Conv1d, OutputLength) {
  EXPECT_EQ(conv_output_length(40000, 10, 5), 7999u);
  EXPECT_EQ(conv_output_length(10, 10, 5), 1u);
  EXPECT_EQ(conv_output_length(9, 10, 1), 0u);
}

TEST(Conv1d, IdentityKernel) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>(rng, {1, 37});
  const auto y = conv(x, Tensor<float>({1, 1, 1}, {1}), Tensor<float>({1}), 1);
  EXPECT_EQ(y, x);
}

TEST(Conv1d, MatchesNaiveOracle) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const std::size_t ci = 1 + uniform_index(rng, 8), co = 1 + uniform_index(rng, 8);
    const std::size_t k = 1 + uniform_index(rng, 12), s = 1 + uniform_index(rng, 5);
    const std::size_t l = k + uniform_index(rng, 200);
    const auto x = random_tensor<float>(rng, {ci, l});
    const auto w = random_tensor<float>(rng, {co, ci, k});
    const auto b = random_tensor<float>(rng, {co});
    const auto y = conv(x, w, b, s);
    const auto ref = naive_conv(x, w, b, s);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t j = 0; j < y.size(); ++j) EXPECT_NEAR(y[j], ref[j], 1e-6 * (1 + std::abs(ref[j])));
  }
}

TEST(Conv1d, RejectsShortInput) {
  Graph<float> g;
  EXPECT_THROW(g.conv1d(g.variable(Tensor<float>({1, 3})), g.variable(Tensor<float>({1, 1, 4})),
                        g.variable(Tensor<float>({1})), 1, "stage 2"),
               std::invalid_argument);
}

Tensor<float> norm(const Tensor<float>& x, float gain, float shift) {
  Graph<float> g;
  const std::size_t c = x.dim(0);
  return g.value(g.channel_norm(g.variable(x), g.variable(Tensor<float>({c}, gain)),
                                g.variable(Tensor<float>({c}, shift))));
}

TEST(ChannelNorm, ConstantColumnIsZero) {
  const auto y = norm(Tensor<float>({2, 1}, {3, 3}), 1, 0);
  EXPECT_FLOAT_EQ(y[0], 0);
  EXPECT_FLOAT_EQ(y[1], 0);
}

TEST(ChannelNorm, AlreadyStandardized) {
  const auto y = norm(Tensor<float>({2, 1}, {1, -1}), 1, 0);
  EXPECT_NEAR(y[0], 1, 1e-4);
  EXPECT_NEAR(y[1], -1, 1e-4);
}

TEST(ChannelNorm, ZeroGainGivesShift) {
  std::mt19937_64 rng(2);
  const auto y = norm(random_tensor<float>(rng, {4, 5}), 0, 0.25f);
  for (float v : y.vec()) EXPECT_FLOAT_EQ(v, 0.25f);
}

// The variance epsilon bounds exact invariance to about eps / (2 var), so the
// columns here keep a variance of at least 1.
TEST(ChannelNorm, InvariantToColumnOffsetAndScale) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const std::size_t c = 2 + uniform_index(rng, 6), l = 1 + uniform_index(rng, 8);
    Tensor<float> x({c, l});
    for (std::size_t t = 0; t < l; ++t) {
      double mean = 0, var = 0;
      for (std::size_t ch = 0; ch < c; ++ch) mean += x.at(ch, t) = static_cast<float>(uniform(rng, -3, 3));
      mean /= c;
      for (std::size_t ch = 0; ch < c; ++ch) var += (x.at(ch, t) - mean) * (x.at(ch, t) - mean);
      var /= c;
      const float boost = var < 1 ? static_cast<float>(1.0 / std::sqrt(var)) : 1.0f;
      for (std::size_t ch = 0; ch < c; ++ch) x.at(ch, t) = static_cast<float>((x.at(ch, t) - mean) * boost);
    }
    auto z = x;
    for (std::size_t t = 0; t < l; ++t) {
      const float a = static_cast<float>(uniform(rng, 1, 5)), o = static_cast<float>(uniform(rng, -3, 3));
      for (std::size_t ch = 0; ch < c; ++ch) z.at(ch, t) = a * x.at(ch, t) + o;
    }
    const auto y1 = norm(x, 1, 0), y2 = norm(z, 1, 0);
    for (std::size_t j = 0; j < y1.size(); ++j) EXPECT_NEAR(y1[j], y2[j], 1e-5);
  }
}

TEST(SmallOps, ReluPoolHead) {
  Graph<float> g;
  const auto r = g.value(g.relu(g.variable(Tensor<float>({3}, {-1, 0, 2}))));
  EXPECT_EQ(r.vec(), (std::vector<float>{0, 0, 2}));
  const auto p = g.value(g.global_avg_pool(g.variable(Tensor<float>({2, 5}, 1.5f))));
  EXPECT_EQ(p.vec(), (std::vector<float>{1.5f, 1.5f}));
  std::mt19937_64 rng(1);
  const auto h = g.value(g.affine(g.variable(random_tensor<float>(rng, {4})),
                                  g.variable(Tensor<float>({6, 4})), g.variable(Tensor<float>({6}))));
  for (float v : h.vec()) EXPECT_EQ(v, 0.0f);
}

double ce(std::vector<double> logits, std::size_t label) {
  Graph<double> g;
  const std::size_t n = logits.size();
  return g.value(g.softmax_cross_entropy(g.variable(Tensor<double>({n}, std::move(logits))), label))[0];
}

TEST(CrossEntropy, HandValues) {
  EXPECT_NEAR(ce({0, 0}, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(ce(std::vector<double>(6, 0.3), 2), std::log(6.0), 1e-12);
  EXPECT_LT(ce({1000, 0, 0}, 0), 1e-12);
  EXPECT_TRUE(std::isfinite(ce({-1000, 1000}, 0)));
}

TEST(KlDivergence, HandValues) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_NEAR(kl_divergence(p, p), 0, 1e-15);
  EXPECT_NEAR(kl_divergence(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-12);
  const std::vector<double> a{0.9, 0.1}, b{0.5, 0.5};
  const double ab = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  const double ba = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  EXPECT_NEAR(kl_divergence(a, b), ab, 1e-12);
  EXPECT_NEAR(kl_divergence(b, a), ba, 1e-12);
  EXPECT_GT(std::abs(ab - ba), 0.1);
  EXPECT_THROW(kl_divergence(std::vector<double>{0.5, 0.4}, b), std::invalid_argument);
}

TEST(Backward, SquareGradient) {
  Graph<double> g;
  Var w = g.variable(Tensor<double>({1}, 3.0));
  g.backward(g.mul(w, w));
  EXPECT_DOUBLE_EQ(g.grad(w)[0], 6.0);
}

TEST(Backward, UnusedParameterGetsZero) {
  ParameterSet<double> params;
  const auto used = params.add("used", Tensor<double>({2}, 1.0));
  const auto unused = params.add("unused", Tensor<double>({3}, 1.0));
  Gradients<double> grads(params);
  Graph<double> g(&params, &grads);
  g.backward(g.sum(g.parameter(used)));
  for (double v : grads.grad(unused).vec()) EXPECT_EQ(v, 0.0);
  for (double v : grads.grad(used).vec()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, EveryOperatorMatchesFiniteDifferences) {
  for (const auto& r : run_gradcheck(123, 20, 1e-4)) {
    EXPECT_EQ(r.failures, 0) << r.op << " max rel error " << r.max_rel_error;
    EXPECT_GE(r.cases, 20) << r.op;
  }
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor<float>(rng, {3, 300});
  const auto w = random_tensor<float>(rng, {8, 3, 7});
  const auto b = random_tensor<float>(rng, {8});
  EXPECT_EQ(conv(x, w, b, 3), conv(x, w, b, 3));
}

template <typename T>
void set_grad(Gradients<T>& g, std::size_t i, T value) {
  g.grad(i).fill(value);
  std::fill(g.touched(i).begin(), g.touched(i).end(), std::uint8_t{1});
}

TEST(Optimizer, PlainStep) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>({1}, 1.0));
  Gradients<double> g(p);
  set_grad(g, 0, 0.5);
  Optimizer<double> opt(p, {OptimizerKind::kSgd, 0.1});
  opt.step(p, g);
  EXPECT_DOUBLE_EQ(p.value(0)[0], 0.95);
}

TEST(Optimizer, ZeroGradientLeavesParameter) {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    ParameterSet<double> p;
    p.add("w", Tensor<double>({2}, 0.7));
    Gradients<double> g(p);
    set_grad(g, 0, 0.0);
    Optimizer<double> opt(p, {kind, 0.1});
    opt.step(p, g);
    EXPECT_EQ(p.value(0)[0], 0.7);
    EXPECT_EQ(p.value(0)[1], 0.7);
  }
}

TEST(Optimizer, AdaptiveFirstStepIsLearningRate) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>({1}, 2.0));
  Gradients<double> g(p);
  set_grad(g, 0, 0.37);
  Optimizer<double> opt(p, {OptimizerKind::kAdam, 0.01});
  opt.step(p, g);
  EXPECT_NEAR(2.0 - p.value(0)[0], 0.01, 1e-7);
}

TEST(Optimizer, UntouchedEntriesKeepValue) {
  ParameterSet<float> p;
  p.add("a", Tensor<float>({3}, 1.0f));
  p.add("b", Tensor<float>({2}, 5.0f));
  Gradients<float> g(p);
  set_grad(g, 0, 1.0f);
  Optimizer<float> opt(p, {OptimizerKind::kAdam, 0.1});
  opt.step(p, g);
  EXPECT_EQ(p.value(1)[0], 5.0f);
  EXPECT_NE(p.value(0)[0], 1.0f);
}

}  // namespace
}  // namespace scnas
