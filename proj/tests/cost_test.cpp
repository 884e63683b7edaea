// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "scnas/cost.h"
#include "scnas/random.h"

namespace scnas {
namespace {

TEST(Macs, HandValues) {
  EXPECT_EQ(macs({1, 16, 10, 5, 40000}), 1279840u);
  EXPECT_EQ(macs({3, 7, 1, 1, 50}), 3u * 7u * 50u);
  EXPECT_EQ(macs({4, 32, 5, 2, 101}), 2 * macs({4, 16, 5, 2, 101}));
  EXPECT_GE(macs({5, 6, 9, 3, 9}), 30u);
  EXPECT_THROW(check_signature({1, 1, 10, 1, 9}), std::invalid_argument);
  EXPECT_THROW(check_signature({0, 1, 1, 1, 9}), std::invalid_argument);
}

TEST(OpCost, TableHitIsExact) {
  std::map<OpSignature, OpCost> rows{{{1, 16, 10, 5, 40000}, {1.25, 3.5}},
                                     {{16, 32, 8, 4, 7999}, {2.5, 4.75}}};
  const auto p = CostProfile::from_rows(rows);
  const auto c = op_cost(p, {16, 32, 8, 4, 7999});
  EXPECT_EQ(c.latency_ms, 2.5);
  EXPECT_EQ(c.energy_mj, 4.75);
}

TEST(OpCost, AffineFitRecoversGenerator) {
  std::mt19937_64 rng(4);
  std::map<OpSignature, OpCost> rows;
  for (int i = 0; i < 40; ++i) {
    OpSignature s{1 + int(uniform_index(rng, 64)), 1 + int(uniform_index(rng, 64)),
                  1 + int(uniform_index(rng, 12)), 1 + int(uniform_index(rng, 4)),
                  100 + int(uniform_index(rng, 5000))};
    const double m = static_cast<double>(macs(s));
    rows[s] = {2e-6 * m, 3e-6 * m + 0.05};
  }
  const auto p = CostProfile::from_rows(rows);
  EXPECT_NEAR(p.fallback().a_lat, 2e-6, 2e-8);
  EXPECT_NEAR(p.fallback().a_en, 3e-6, 3e-8);
  EXPECT_NEAR(p.fallback().b_lat, 0, 1e-6);
  EXPECT_NEAR(p.fallback().b_en, 0.05, 5e-4);
  const OpSignature miss{77, 91, 7, 1, 3000};
  ASSERT_FALSE(p.contains(miss));
  const double m = static_cast<double>(macs(miss));
  EXPECT_NEAR(op_cost(p, miss).latency_ms, 2e-6 * m, 0.01 * 2e-6 * m);
  EXPECT_NEAR(op_cost(p, miss).energy_mj, 3e-6 * m + 0.05, 0.01 * (3e-6 * m + 0.05));
}

TEST(Compose, EmptyIsZero) {
  const auto e = compose_cost(CostProfile::analytic({1, 1, 1, 1}), {});
  EXPECT_EQ(e.latency_ms, 0);
  EXPECT_EQ(e.energy_mj, 0);
  EXPECT_EQ(e.daily_energy_mwh, 0);
}

TEST(Compose, DutyCycleIdentity) {
  EXPECT_EQ(DutyCycle{}.mwh_per_mj(), 2.4);
  const auto p = CostProfile::from_rows({{{1, 1, 1, 1, 1}, {1.0, 15.83}}});
  const auto e = compose_cost(p, {{1, 1, 1, 1, 1}});
  EXPECT_EQ(e.daily_energy_mwh, 2.4 * 15.83);
  EXPECT_NEAR(e.daily_energy_mwh, 38.0, 0.01);
}

TEST(ModelCost, AdditiveAndDailyEnergyExact) {
  const auto s = default_search_space();
  const auto p = make_reference_profile(s, 80000);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto c = sample_uniform(s, rng);
    const auto ops = model_ops(c, s, 80000);
    const auto e = model_cost(p, c, s, 80000);
    double lat = 0, en = 0;
    for (const auto& op : ops) {
      lat += op_cost(p, op).latency_ms;
      en += op_cost(p, op).energy_mj;
    }
    EXPECT_EQ(e.latency_ms, lat);
    EXPECT_EQ(e.energy_mj, en);
    EXPECT_EQ(e.daily_energy_mwh, 2.4 * e.energy_mj);
    EXPECT_EQ(e.per_op.size(), ops.size());
  }
}

TEST(ModelCost, MonotoneInGenes) {
  const auto s = default_search_space();
  const auto table = make_reference_profile(s, 80000);
  const auto analytic = CostProfile::analytic(table.fallback());
  std::mt19937_64 rng(12);
  for (const CostProfile* p : {&table, &analytic}) {
    for (int i = 0; i < 100; ++i) {
      const auto a = encode(sample_uniform(s, rng), s);
      auto b = a;
      for (std::size_t g = 0; g < b.size(); ++g) {
        const int arity = g % 3 == 0 ? int(s.stages[g / 3].channels.size())
                          : g % 3 == 1 ? int(s.stages[g / 3].repeats.size())
                                       : int(s.stages[g / 3].kernels.size());
        b[g] += int(uniform_index(rng, std::uint64_t(arity - a[g])));
      }
      const auto ca = model_cost(*p, decode(a, s), s, 80000);
      const auto cb = model_cost(*p, decode(b, s), s, 80000);
      EXPECT_LE(ca.latency_ms, cb.latency_ms);
      EXPECT_LE(ca.daily_energy_mwh, cb.daily_energy_mwh);
    }
  }
}

TEST(ModelCost, ReferenceOrdersMinBelowMax) {
  const auto s = default_search_space();
  const auto p = make_reference_profile(s, 80000);
  const auto lo = model_cost(p, min_config(s), s, 80000);
  const auto hi = model_cost(p, max_config(s), s, 80000);
  EXPECT_LT(lo.latency_ms, hi.latency_ms);
  EXPECT_LT(lo.daily_energy_mwh, hi.daily_energy_mwh);
  // Every op of every config is a table hit.
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    for (const auto& op : model_ops(sample_uniform(s, rng), s, 80000)) EXPECT_TRUE(p.contains(op));
  }
}

TEST(Bottleneck, HandValues) {
  const auto p = CostProfile::analytic({1e-3, 0, 1e-3, 0});
  EXPECT_EQ(bottleneck_fraction(compose_cost(p, {{2, 2, 1, 1, 10}})), 1.0);
  EXPECT_EQ(bottleneck_fraction(compose_cost(p, {{2, 2, 1, 1, 10}, {2, 2, 1, 1, 10}})), 0.5);
}

TEST(Profile, CsvRoundTripAndColumnOrder) {
  const auto s = default_search_space();
  const auto p = make_reference_profile(s, 8000);
  const auto q = CostProfile::parse(p.to_csv());
  EXPECT_EQ(q.rows().size(), p.rows().size());
  EXPECT_EQ(q.to_csv(), p.to_csv());
  const auto r = CostProfile::parse("latency_ms,l_in,c_in,c_out,kernel,stride,energy_mj\n1.5,100,2,3,4,1,2.5\n");
  EXPECT_EQ(op_cost(r, {2, 3, 4, 1, 100}).latency_ms, 1.5);
  EXPECT_EQ(op_cost(r, {2, 3, 4, 1, 100}).energy_mj, 2.5);
}

TEST(Profile, RejectsMalformedTables) {
  EXPECT_THROW(CostProfile::parse("c_in,c_out,kernel,stride,l_in,latency_ms\n1,1,1,1,1,1\n"), std::invalid_argument);
  EXPECT_THROW(CostProfile::parse("c_in,c_out,kernel,stride,l_in,latency_ms,energy_mj,extra\n"), std::invalid_argument);
  EXPECT_THROW(CostProfile::parse("c_in,c_out,kernel,stride,l_in,latency_ms,energy_mj\n1,1,1,1,1,x,1\n"),
               std::invalid_argument);
  EXPECT_THROW(CostProfile::parse("c_in,c_out,kernel,stride,l_in,latency_ms,energy_mj\n1,1,4,1,2,1,1\n"),
               std::exception);
  EXPECT_THROW(CostProfile::load("/nonexistent/profile.csv"), std::runtime_error);
}

TEST(ReferenceDevice, PositiveAndIncreasing) {
  const auto a = reference_device_cost({16, 32, 8, 4, 7999});
  const auto b = reference_device_cost({16, 64, 8, 4, 7999});
  EXPECT_GT(a.latency_ms, 0);
  EXPECT_GT(a.energy_mj, 0);
  EXPECT_LT(a.latency_ms, b.latency_ms);
  EXPECT_LT(a.energy_mj, b.energy_mj);
}

}  // namespace
}  // namespace scnas
