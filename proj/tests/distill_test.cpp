// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "scnas/distill.h"
#include "scnas/random.h"

namespace scnas {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double score(std::vector<double> y) { return sample_uncertainty(y, uniform_prior(y.size())); }

TEST(SampleUncertainty, HandValues) {
  EXPECT_NEAR(score({1, 0, 0, 0, 0, 0}), -std::log(5.0 / 36.0), 1e-12);
  EXPECT_NEAR(score({1, 0, 0, 0, 0, 0}), 1.9741, 1e-3);
  EXPECT_NEAR(score({0.5, 0.5, 0, 0, 0, 0}), -std::log(1.0 / 18.0), 1e-12);
  EXPECT_NEAR(score({0.5, 0.5, 0, 0, 0, 0}), 2.8904, 1e-3);
  EXPECT_NEAR(score(uniform_prior(6)), 27.631, 1e-3);
}

TEST(SampleUncertainty, RejectsMismatchedInputs) {
  EXPECT_THROW(sample_uncertainty(std::vector<double>{1, 0}, uniform_prior(3)), std::invalid_argument);
  EXPECT_THROW(sample_uncertainty(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(SampleUncertainty, StrictlyDecreasingInDistance) {
  // Mix one-hot with the prior; more one-hot weight means larger MSD.
  const auto prior = uniform_prior(6);
  double last = kInf;
  for (int i = 1; i <= 20; ++i) {
    const double w = i / 20.0;
    std::vector<double> y(6);
    for (std::size_t j = 0; j < 6; ++j) y[j] = (1 - w) * prior[j] + w * (j == 2 ? 1.0 : 0.0);
    const double s = sample_uncertainty(y, prior);
    EXPECT_LT(s, last);
    last = s;
  }
}

TEST(SampleUncertainty, BoundedOnRandomDistributions) {
  std::mt19937_64 rng(3);
  const double lo = -std::log(5.0 / 36.0), hi = -std::log(1e-12);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> y(6);
    double sum = 0;
    for (auto& v : y) sum += v = -std::log(1 - uniform01(rng));
    for (auto& v : y) v /= sum;
    const double s = score(y);
    EXPECT_GE(s, lo - 1e-9);
    EXPECT_LE(s, hi + 1e-9);
  }
}

TEST(BatchUncertainty, Mean) {
  EXPECT_NEAR(batch_uncertainty(std::vector<double>{1.9741, 2.8904}), 2.43225, 1e-9);
  EXPECT_EQ(batch_uncertainty(std::vector<double>{3.5}), 3.5);
  EXPECT_EQ(batch_uncertainty(std::vector<double>(7, 1.25)), 1.25);
  EXPECT_THROW(batch_uncertainty(std::vector<double>{}), std::invalid_argument);
}

TEST(Gate, Decisions) {
  EXPECT_TRUE(gate_decision(2.4322, 2.0));
  EXPECT_FALSE(gate_decision(2.4322, 3.0));
  EXPECT_FALSE(gate_decision(1e300, kInf));
  EXPECT_TRUE(gate_decision(-1e300, -kInf));
  EXPECT_FALSE(gate_decision(2.0, 2.0));
}

TEST(Gate, ReplayIsMonotoneAndNested) {
  std::mt19937_64 rng(5);
  std::vector<double> scores(500);
  for (auto& s : scores) s = uniform(rng, 1.9, 6.0);
  EXPECT_EQ(replay_query_ratio(scores, kInf), 0.0);
  EXPECT_EQ(replay_query_ratio(scores, -kInf), 1.0);
  double last = 1.0;
  for (double tau = 1.5; tau <= 6.5; tau += 0.05) {
    const double r = replay_query_ratio(scores, tau);
    EXPECT_LE(r, last);
    last = r;
    for (double s : scores) {
      if (gate_decision(s, tau + 0.05)) EXPECT_TRUE(gate_decision(s, tau));
    }
  }
}

KdConfig kd(double alpha, double t) {
  KdConfig c;
  c.alpha = alpha;
  c.temperature = t;
  return c;
}

double ce(const std::vector<double>& z, std::size_t label) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  return std::log(s) + m - z[label];
}

TEST(KdLoss, EqualLogitsLeaveCrossEntropy) {
  const std::vector<std::vector<double>> z{{0.3, -1.2, 2.0, 0.1, 0.0, -0.5}};
  const double l = kd_loss(z, z, {2}, kd(0.5, 4.0));
  EXPECT_NEAR(l, 0.5 * ce(z[0], 2), 1e-12);
}

TEST(KdLoss, AlphaZeroIsCrossEntropy) {
  const std::vector<std::vector<double>> s{{0.3, -1.2}}, t{{5.0, -3.0}};
  EXPECT_NEAR(kd_loss(s, t, {1}, kd(0.0, 4.0)), ce(s[0], 1), 1e-12);
}

TEST(KdLoss, CertainTeacherGivesCrossEntropyToTeacher) {
  const std::vector<std::vector<double>> s{{0.4, -0.7}}, t{{60.0, -60.0}};
  // alpha = 1, T = 1: KL(onehot(0) || softmax(s)) = -log softmax(s)[0].
  EXPECT_NEAR(kd_loss(s, t, {0}, kd(1.0, 1.0)), ce(s[0], 0), 1e-9);
}

TEST(KdLoss, BatchMeanAndGraphAgree) {
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> s(4, std::vector<double>(6)), t = s;
  for (auto* m : {&s, &t}) {
    for (auto& row : *m) {
      for (auto& v : row) v = uniform(rng, -3, 3);
    }
  }
  const std::vector<std::size_t> labels{0, 3, 5, 1};
  const auto cfg = kd(0.5, 4.0);
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Graph<double> g;
    Var v = g.variable(Tensor<double>({6}, s[i]));
    sum += g.value(kd_loss<double>(g, v, t[i], labels[i], cfg))[0];
  }
  EXPECT_NEAR(kd_loss(s, t, labels, cfg), sum / 4, 1e-12);
}

TEST(KdConfig, Validation) {
  EXPECT_NO_THROW(validate_kd_config(KdConfig{}));
  EXPECT_THROW(validate_kd_config(kd(1.5, 4.0)), std::invalid_argument);
  EXPECT_THROW(validate_kd_config(kd(0.5, 0.0)), std::invalid_argument);
  KdConfig c;
  c.tau = std::nan("");
  EXPECT_THROW(validate_kd_config(c), std::invalid_argument);
}

TEST(Ledger, CountsAndReport) {
  QueryLedger l;
  l.record(true, 2.0);
  l.record(false, 1.0);
  l.record(false, 1.0);
  l.record(true, 2.0);
  EXPECT_EQ(l.total(), 4u);
  EXPECT_EQ(l.queried(), 2u);
  EXPECT_EQ(l.query_ratio(), 0.5);
  const auto s = ledger_report(l, 3.0);
  EXPECT_EQ(s.wall_clock_s, 6.0);
  ASSERT_TRUE(s.wall_clock_ratio.has_value());
  EXPECT_EQ(*s.wall_clock_ratio, 2.0);
  EXPECT_EQ(s.gated_step_s, 4.0);
  EXPECT_EQ(s.standard_step_s, 2.0);
  const std::string counts = ledger_counts_text(s);
  EXPECT_NE(counts.find("queried_batches 2"), std::string::npos) << counts;
  EXPECT_EQ(counts.find("wall"), std::string::npos) << counts;
  EXPECT_THROW(ledger_report(QueryLedger{}), std::invalid_argument);
}

class CountingTeacher : public TeacherHandle {
 protected:
  std::vector<std::vector<float>> run(const std::vector<std::span<const float>>& batch) override {
    return std::vector<std::vector<float>>(batch.size(), std::vector<float>(6, 0.0f));
  }
};

TEST(Teacher, EveryCallIsOneQuery) {
  CountingTeacher t;
  const std::vector<float> x(10, 0.1f);
  std::vector<std::span<const float>> batch{x, x, x};
  EXPECT_EQ(t.query(batch).size(), 3u);
  t.query(batch);
  EXPECT_EQ(t.query_count(), 2u);
}

}  // namespace
}  // namespace scnas
