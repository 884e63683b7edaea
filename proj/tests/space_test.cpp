// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "scnas/cost.h"
#include "scnas/random.h"
#include "scnas/space.h"
#include "scnas/supernet.h"

namespace scnas {
namespace {

SearchSpace two_stage_space() {
  SearchSpace s;
  s.stages = {{{4}, {1}, {10}, 5}, {{6}, {1}, {8}, 4}};
  return s;
}

std::vector<float> random_signal(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(uniform(rng, -0.9, 0.9));
  return x;
}

TEST(DefaultSpace, StageTable) {
  const auto s = default_search_space();
  ASSERT_EQ(s.stages.size(), 8u);
  EXPECT_EQ(s.stages[0].channels, (std::vector<int>{16, 24, 32}));
  EXPECT_EQ(s.stages[0].kernels, (std::vector<int>{10}));
  EXPECT_EQ(s.stages[0].stride, 5);
  EXPECT_EQ(s.stages[7].kernels, (std::vector<int>{10, 11, 12}));
  EXPECT_EQ(s.stages[7].stride, 1);
  EXPECT_EQ(space_cardinality(s), 387420489u);
  EXPECT_NO_THROW(validate_space(s));
}

TEST(DefaultSpace, CardinalityIsStrictlyMonotone) {
  const auto s = default_search_space();
  const auto full = space_cardinality(s);
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    for (int field = 0; field < 3; ++field) {
      SearchSpace t = s;
      auto& v = field == 0 ? t.stages[i].channels : field == 1 ? t.stages[i].repeats : t.stages[i].kernels;
      if (v.size() < 2) continue;
      v.pop_back();
      EXPECT_LT(space_cardinality(t), full);
    }
  }
}

TEST(ValidateSpace, RejectsBadSpecs) {
  SearchSpace s = two_stage_space();
  s.stages[0].channels = {8, 4};
  EXPECT_THROW(validate_space(s), std::invalid_argument);
  s = two_stage_space();
  s.stages[1].repeats = {4};
  EXPECT_THROW(validate_space(s), std::invalid_argument);
  s = two_stage_space();
  s.stages[0].stride = 0;
  EXPECT_THROW(validate_space(s), std::invalid_argument);
  EXPECT_THROW(validate_space(SearchSpace{}), std::invalid_argument);
}

TEST(Encoding, RoundTripsAndParses) {
  const auto s = default_search_space();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto c = sample_uniform(s, rng);
    const auto genes = encode(c, s);
    ASSERT_EQ(genes.size(), 24u);
    EXPECT_EQ(decode(genes, s), c);
    EXPECT_EQ(parse_config(to_string(c)), c);
  }
  EXPECT_THROW(parse_config("16:1"), std::invalid_argument);
  EXPECT_THROW(decode(std::vector<int>(24, 3), s), std::out_of_range);
}

TEST(Sampling, ReproducibleUnderSeed) {
  const auto s = default_search_space();
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_uniform(s, a), sample_uniform(s, b));
}

TEST(Sampling, GeneFrequenciesAreUniform) {
  const auto s = default_search_space();
  std::mt19937_64 rng(8);
  const int n = 10000;
  std::vector<std::map<int, int>> counts(24);
  for (int i = 0; i < n; ++i) {
    const auto genes = encode(sample_uniform(s, rng), s);
    for (std::size_t g = 0; g < genes.size(); ++g) ++counts[g][genes[g]];
  }
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const double k = static_cast<double>(counts[g].size());
    const double p = 1.0 / k;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (const auto& [value, count] : counts[g]) {
      EXPECT_LE(std::abs(count - n * p), 3 * sigma + 1e-9) << "gene " << g << " value " << value;
    }
  }
}

TEST(Sampling, SingletonSpace) {
  const auto s = default_search_space();
  const auto only = parse_config("24:1:10/48:1:8/96:2:4/128:3:1/192:1:2/256:2:5/128:1:9/192:3:11");
  const auto single = singleton_space(only, s);
  EXPECT_EQ(space_cardinality(single), 1u);
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_uniform(single, rng), only);
}

TEST(Sampling, RejectingFilterGivesUp) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_uniform(default_search_space(), rng, [](const SubnetConfig&) { return false; }),
               std::runtime_error);
}

TEST(MinInputLength, HandValues) {
  SearchSpace one;
  one.stages = {{{4}, {1}, {10}, 5}};
  EXPECT_EQ(min_input_length(min_config(one), one), 10u);
  const auto two = two_stage_space();
  EXPECT_EQ(min_input_length(min_config(two), two), 45u);
  const auto s = default_search_space();
  EXPECT_LE(min_input_length(max_config(s), s), 8000u);
}

TEST(LayerPlan, StrideOnlyOnFirstRepeat) {
  const auto s = default_search_space();
  const auto plan = layer_plan(max_config(s), s);
  for (const auto& l : plan) {
    if (l.slot > 0) {
      EXPECT_EQ(l.stride, 1);
      EXPECT_EQ(l.c_in, l.c_out);
    }
  }
  EXPECT_EQ(plan.front().c_in, 1);
}

TEST(ValidateConfig, MinConfigPassesAndThetaOneIsVacuous) {
  const auto s = default_search_space();
  const auto profile = make_reference_profile(s, 80000);
  CostContext ctx{&profile, 80000, {}, 0.35};
  EXPECT_TRUE(validate_config(min_config(s), s, ctx));
  ctx.theta = 1.0;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) EXPECT_TRUE(validate_config(sample_uniform(s, rng), s, ctx));
}

TEST(ValidateConfig, DominantOperatorIsRejected) {
  // Latency proportional to MACs; the wide second stage carries most of it.
  SearchSpace s;
  s.stages = {{{2}, {1}, {3}, 1}, {{64}, {1}, {9}, 1}, {{2}, {1}, {1}, 1}};
  const auto profile = CostProfile::analytic({1e-6, 0, 1e-6, 0});
  const auto c = min_config(s);
  const double frac = bottleneck_fraction(profile, c, s, 1000);
  EXPECT_GT(frac, 0.5);
  CostContext ctx{&profile, 1000, {}, 0.35};
  EXPECT_FALSE(validate_config(c, s, ctx));
  ctx.theta = 1.0;
  EXPECT_TRUE(validate_config(c, s, ctx));
}

class SupernetTest : public ::testing::Test {
 protected:
  // Fresh shortcut blocks have zero gain; randomize so every slice matters.
  static void SetUpTestSuite() {
    net_ = new Supernet(default_search_space(), 5);
    std::mt19937_64 rng(77);
    auto& p = net_->params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.name(i).find("norm.g") == std::string::npos) continue;
      for (auto& v : p.value(i).vec()) v = static_cast<float>(uniform(rng, 0.5, 1.5));
    }
  }
  static void TearDownTestSuite() {
    delete net_;
    net_ = nullptr;
  }
  static Supernet* net_;
};
Supernet* SupernetTest::net_ = nullptr;

TEST_F(SupernetTest, ExtractionMatchesSlicedForward) {
  const auto& s = net_->space();
  const auto x = random_signal(7, 8000);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto c = sample_uniform(s, rng);
    const auto sliced = net_->logits(c, x);
    const Supernet standalone = net_->extract(c);
    const auto direct = standalone.logits(standalone.only_config(), x);
    ASSERT_EQ(sliced.size(), 6u);
    for (std::size_t j = 0; j < sliced.size(); ++j) {
      EXPECT_NEAR(sliced[j], direct[j], 1e-5) << to_string(c);
    }
  }
}

TEST_F(SupernetTest, GraphForwardMatchesInference) {
  const auto c = max_config(net_->space());
  const auto x = random_signal(8, 8000);
  Graph<float> g(&net_->params(), nullptr);
  const auto recorded = g.value(net_->forward(g, c, x));
  const auto plain = net_->logits(c, x);
  for (std::size_t j = 0; j < plain.size(); ++j) EXPECT_NEAR(recorded[j], plain[j], 1e-5);
}

TEST_F(SupernetTest, MaxConfigUsesEveryWeight) {
  const auto& s = net_->space();
  EXPECT_EQ(net_->parameter_count(max_config(s)), net_->params().total_elements());
  EXPECT_LT(net_->parameter_count(min_config(s)), net_->parameter_count(max_config(s)));
  const auto x = random_signal(9, 8000);
  const Supernet full = net_->extract(max_config(s));
  EXPECT_EQ(full.logits(full.only_config(), x), net_->logits(max_config(s), x));
}

TEST_F(SupernetTest, InactiveSlotWeightsDoNotMatter) {
  auto c = parse_config("16:1:10/32:1:8/64:1:4/128:1:1/128:1:1/128:1:4/128:1:7/128:1:10");
  const auto x = random_signal(10, 8000);
  Supernet copy = *net_;
  const auto before = copy.logits(c, x);
  // Repeat slot 2 of stage 4 and the unused channels of stage 8 are outside c.
  auto& w = copy.params().value(copy.params().index(Supernet::conv_w(3, 2)));
  w.fill(123.0f);
  auto& g8 = copy.params().value(copy.params().index(Supernet::norm_g(7, 0)));
  for (std::size_t i = 128; i < g8.size(); ++i) g8[i] = -7.0f;
  EXPECT_EQ(copy.logits(c, x), before);
}

TEST_F(SupernetTest, KernelWindowIsCentered) {
  EXPECT_EQ(kernel_window_offset(12, 10), 1);
  EXPECT_EQ(kernel_window_offset(12, 11), 0);
  EXPECT_EQ(kernel_window_offset(9, 8), 0);
  EXPECT_EQ(kernel_window_offset(9, 7), 1);
  EXPECT_EQ(kernel_window_offset(4, 4), 0);
}

TEST_F(SupernetTest, ShortInputNamesTheStage) {
  const auto c = max_config(net_->space());
  const auto x = random_signal(1, 50);
  try {
    net_->logits(c, x);
    FAIL() << "expected a length error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos) << e.what();
  }
}

TEST(Supernet, SameSeedSameWeights) {
  const Supernet a(default_search_space(), 5), b(default_search_space(), 5);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params().value(i), b.params().value(i));
}

}  // namespace
}  // namespace scnas
