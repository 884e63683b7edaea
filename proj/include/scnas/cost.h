// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scnas/space.h"

namespace scnas {

struct OpSignature {
  int c_in = 0;
  int c_out = 0;
  int kernel = 0;
  int stride = 1;
  int l_in = 0;
  auto operator<=>(const OpSignature&) const = default;
};

struct OpCost {
  double latency_ms = 0;
  double energy_mj = 0;
};

// latency = a_lat * macs + b_lat, energy = a_en * macs + b_en
struct FallbackCoefficients {
  double a_lat = 0;
  double b_lat = 0;
  double a_en = 0;
  double b_en = 0;
};

// Throws std::invalid_argument unless l_in >= kernel and all fields positive.
void check_signature(const OpSignature& sig);

// c_in * c_out * kernel * L_out with the valid-convolution output length.
std::uint64_t macs(const OpSignature& sig);

// Operator-level latency/energy table with an affine-in-MACs fallback for
// signatures that were never profiled. Immutable once built.
class CostProfile {
 public:
  CostProfile() = default;
  // A table-free profile that answers every query from the given model.
  static CostProfile analytic(FallbackCoefficients coefficients);
  // Builds a profile from rows and fits the fallback by least squares.
  static CostProfile from_rows(std::map<OpSignature, OpCost> rows);

  // Delimited text: header c_in,c_out,kernel,stride,l_in,latency_ms,energy_mj
  // (any column order, no unknown or missing columns), one row per signature.
  static CostProfile load(const std::string& path);
  static CostProfile parse(const std::string& text);
  std::string to_csv() const;
  void save(const std::string& path) const;

  const std::map<OpSignature, OpCost>& rows() const { return rows_; }
  const FallbackCoefficients& fallback() const { return fallback_; }
  bool contains(const OpSignature& sig) const { return rows_.count(sig) != 0; }

 private:
  std::map<OpSignature, OpCost> rows_;
  FallbackCoefficients fallback_;
};

// Least-squares affine fit of latency and energy against MACs.
FallbackCoefficients fit_fallback(const std::map<OpSignature, OpCost>& rows);

// Exact table hit, otherwise the fallback clamped at zero.
OpCost op_cost(const CostProfile& profile, const OpSignature& sig);

// Daily energy bookkeeping: one inference per segment over the active period.
struct DutyCycle {
  double segment_seconds = 5.0;
  double active_hours = 12.0;

  // mW*h per mJ of per-inference energy; 2.4 for the defaults.
  double mwh_per_mj() const { return active_hours / segment_seconds; }
};

struct CostEstimate {
  double latency_ms = 0;
  double energy_mj = 0;
  double daily_energy_mwh = 0;
  std::vector<OpCost> per_op;
};

// Convolution signatures of the config, each repeat counted, in execution
// order, for an input of `input_len` samples.
std::vector<OpSignature> model_ops(const SubnetConfig& config, const SearchSpace& space,
                                   std::size_t input_len);

CostEstimate compose_cost(const CostProfile& profile, const std::vector<OpSignature>& ops,
                          const DutyCycle& duty = {});

CostEstimate model_cost(const CostProfile& profile, const SubnetConfig& config,
                        const SearchSpace& space, std::size_t input_len,
                        const DutyCycle& duty = {});

// Largest single-op latency over the model total, in (0, 1].
double bottleneck_fraction(const CostEstimate& estimate);
double bottleneck_fraction(const CostProfile& profile, const SubnetConfig& config,
                           const SearchSpace& space, std::size_t input_len);

inline constexpr double kDefaultBottleneckTheta = 0.35;

// Everything validate_config needs to judge a config.
struct CostContext {
  const CostProfile* profile = nullptr;
  std::size_t input_len = 80000;
  DutyCycle duty;
  double theta = kDefaultBottleneckTheta;
};

// True iff no single operator's estimated latency exceeds theta times the
// model's total estimated latency. theta must lie in (0, 1].
bool validate_config(const SubnetConfig& config, const SearchSpace& space,
                     const CostContext& cost);

// Synthetic device model used to produce the bundled reference table.
OpCost reference_device_cost(const OpSignature& sig);
// Reference rows for every convolution any config of `space` executes on an
// input of `input_len` samples.
CostProfile make_reference_profile(const SearchSpace& space, std::size_t input_len);

}  // namespace scnas
