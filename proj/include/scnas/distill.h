// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scnas/graph.h"

namespace scnas {

struct KdConfig {
  // Query the teacher when the batch score exceeds tau. +inf never queries,
  // -inf always does.
  double tau = std::numeric_limits<double>::infinity();
  double temperature = 4.0;
  double alpha = 0.5;
  double epsilon = kLogEpsilon;
};

void validate_kd_config(const KdConfig& cfg);

std::vector<double> uniform_prior(std::size_t n);

// S = -ln(max(MSD, eps)) with MSD = (1/n) sum_i (Y_i - prior_i)^2.
// Larger means the prediction sits closer to the prior, i.e. less certain.
double sample_uncertainty(std::span<const double> probs, std::span<const double> prior,
                          double epsilon = kLogEpsilon);

// Mean of per-sample scores over the batch.
double batch_uncertainty(std::span<const double> scores);

inline bool gate_decision(double s_batch, double tau) { return s_batch > tau; }

// (1 - alpha) * CE(label, student) + alpha * T^2 * KL(softmax(teacher/T) || softmax(student/T))
// for one example, recorded on `graph` so it can be differentiated.
template <typename T>
Var kd_loss(Graph<T>& graph, Var student_logits, std::span<const T> teacher_logits,
            std::size_t label, const KdConfig& cfg);

// Batch mean of the per-example loss above (value only).
double kd_loss(const std::vector<std::vector<double>>& student_logits,
               const std::vector<std::vector<double>>& teacher_logits,
               const std::vector<std::size_t>& labels, const KdConfig& cfg);

// Opaque teacher: batch of inputs in, batch of logits out. Every call to
// query() counts as one teacher query. Calls are serialized.
class TeacherHandle {
 public:
  virtual ~TeacherHandle() = default;

  std::vector<std::vector<float>> query(const std::vector<std::span<const float>>& batch);

  std::uint64_t query_count() const { return queries_; }
  double query_seconds() const { return seconds_; }

 protected:
  virtual std::vector<std::vector<float>> run(
      const std::vector<std::span<const float>>& batch) = 0;

 private:
  std::mutex mu_;
  std::uint64_t queries_ = 0;
  double seconds_ = 0;
};

struct LedgerSummary {
  std::uint64_t total_batches = 0;
  std::uint64_t queried_batches = 0;
  double query_ratio = 0;
  double wall_clock_s = 0;
  double gated_step_s = 0;
  double standard_step_s = 0;
  // Present when a standard-training reference time was supplied.
  std::optional<double> reference_wall_clock_s;
  std::optional<double> wall_clock_ratio;
};

class QueryLedger {
 public:
  void record(bool queried, double seconds);

  std::uint64_t total() const { return total_; }
  std::uint64_t queried() const { return queried_; }
  double query_ratio() const;
  double gated_seconds() const { return gated_s_; }
  double standard_seconds() const { return standard_s_; }
  double wall_clock_seconds() const { return gated_s_ + standard_s_; }
  const std::vector<std::uint8_t>& decisions() const { return decisions_; }

 private:
  mutable std::mutex mu_;
  std::uint64_t total_ = 0;
  std::uint64_t queried_ = 0;
  double gated_s_ = 0;
  double standard_s_ = 0;
  std::vector<std::uint8_t> decisions_;
};

// Throws if the ledger saw no batches.
LedgerSummary ledger_report(const QueryLedger& ledger,
                            std::optional<double> reference_wall_clock_s = std::nullopt);

// Counts only, no timing: deterministic across reruns.
std::string ledger_counts_text(const LedgerSummary& summary);
// Counts plus wall-clock fields.
std::string ledger_text(const LedgerSummary& summary);

// Query ratio a gate with threshold tau would produce on a recorded sequence
// of batch scores.
double replay_query_ratio(std::span<const double> batch_scores, double tau);

}  // namespace scnas
