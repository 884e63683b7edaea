// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/distill.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace scnas {

namespace {

void check_distribution(std::span<const double> v, const char* what) {
  double s = 0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
    }
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(what) + " does not sum to 1 (sum " +
                                std::to_string(s) + ")");
  }
}

}  // namespace

void validate_kd_config(const KdConfig& cfg) {
  if (!(cfg.temperature > 0)) throw std::invalid_argument("kd temperature must be positive");
  if (!(cfg.alpha >= 0 && cfg.alpha <= 1)) throw std::invalid_argument("kd alpha must lie in [0, 1]");
  if (!(cfg.epsilon > 0)) throw std::invalid_argument("kd epsilon must be positive");
  if (std::isnan(cfg.tau)) throw std::invalid_argument("kd tau must not be NaN");
}

std::vector<double> uniform_prior(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_prior: n must be positive");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

double sample_uncertainty(std::span<const double> probs, std::span<const double> prior,
                          double epsilon) {
  if (probs.size() < 2 || probs.size() != prior.size()) {
    throw std::invalid_argument("sample_uncertainty: need n >= 2 and matching prior length");
  }
  check_distribution(probs, "sample_uncertainty: probabilities");
  check_distribution(prior, "sample_uncertainty: prior");
  double msd = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double d = probs[i] - prior[i];
    msd += d * d;
  }
  msd /= static_cast<double>(probs.size());
  return -std::log(std::max(msd, epsilon));
}

double batch_uncertainty(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("batch_uncertainty: empty batch");
  double s = 0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

template <typename T>
Var kd_loss(Graph<T>& graph, Var student_logits, std::span<const T> teacher_logits,
            std::size_t label, const KdConfig& cfg) {
  validate_kd_config(cfg);
  const auto& z = graph.value(student_logits);
  if (z.size() != teacher_logits.size()) {
    throw std::invalid_argument("kd_loss: student has " + std::to_string(z.size()) +
                                " logits, teacher has " + std::to_string(teacher_logits.size()));
  }
  const T alpha = static_cast<T>(cfg.alpha);
  const T temp = static_cast<T>(cfg.temperature);
  Var ce = graph.softmax_cross_entropy(student_logits, label);
  if (cfg.alpha == 0) return ce;
  const std::vector<T> target = softmax(teacher_logits, temp);
  Var kl = graph.kl_to_target(student_logits, target, temp);
  Var hard = graph.scale(ce, T(1) - alpha);
  Var soft = graph.scale(kl, alpha * temp * temp);
  return graph.add(hard, soft);
}

template Var kd_loss(Graph<float>&, Var, std::span<const float>, std::size_t, const KdConfig&);
template Var kd_loss(Graph<double>&, Var, std::span<const double>, std::size_t, const KdConfig&);

double kd_loss(const std::vector<std::vector<double>>& student_logits,
               const std::vector<std::vector<double>>& teacher_logits,
               const std::vector<std::size_t>& labels, const KdConfig& cfg) {
  if (student_logits.size() != teacher_logits.size() || student_logits.size() != labels.size() ||
      student_logits.empty()) {
    throw std::invalid_argument("kd_loss: batch sizes of student, teacher and labels differ");
  }
  double total = 0;
  for (std::size_t i = 0; i < student_logits.size(); ++i) {
    Graph<double> g;
    Var z = g.constant(Tensor<double>(Shape{student_logits[i].size()}, student_logits[i]));
    Var l = kd_loss<double>(g, z, teacher_logits[i], labels[i], cfg);
    total += g.value(l)[0];
  }
  return total / static_cast<double>(student_logits.size());
}

std::vector<std::vector<float>> TeacherHandle::query(
    const std::vector<std::span<const float>>& batch) {
  std::lock_guard<std::mutex> lock(mu_);
  const auto t0 = std::chrono::steady_clock::now();
  auto out = run(batch);
  seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++queries_;
  if (out.size() != batch.size()) {
    throw std::runtime_error("teacher returned " + std::to_string(out.size()) +
                             " outputs for a batch of " + std::to_string(batch.size()));
  }
  return out;
}

void QueryLedger::record(bool queried, double seconds) {
  std::lock_guard<std::mutex> lock(mu_);
  ++total_;
  if (queried) {
    ++queried_;
    gated_s_ += seconds;
  } else {
    standard_s_ += seconds;
  }
  decisions_.push_back(queried ? 1 : 0);
}

double QueryLedger::query_ratio() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_ == 0 ? 0.0 : static_cast<double>(queried_) / static_cast<double>(total_);
}

LedgerSummary ledger_report(const QueryLedger& ledger, std::optional<double> reference) {
  if (ledger.total() == 0) throw std::invalid_argument("ledger_report: no batches recorded");
  LedgerSummary s;
  s.total_batches = ledger.total();
  s.queried_batches = ledger.queried();
  s.query_ratio = ledger.query_ratio();
  s.gated_step_s = ledger.gated_seconds();
  s.standard_step_s = ledger.standard_seconds();
  s.wall_clock_s = ledger.wall_clock_seconds();
  if (reference && *reference > 0) {
    s.reference_wall_clock_s = *reference;
    s.wall_clock_ratio = s.wall_clock_s / *reference;
  }
  return s;
}

std::string ledger_counts_text(const LedgerSummary& s) {
  std::ostringstream os;
  os << "total_batches " << s.total_batches << '\n';
  os << "queried_batches " << s.queried_batches << '\n';
  os << std::setprecision(6) << std::fixed;
  os << "query_ratio " << s.query_ratio << '\n';
  return os.str();
}

std::string ledger_text(const LedgerSummary& s) {
  std::ostringstream os;
  os << ledger_counts_text(s);
  os << std::setprecision(3) << std::fixed;
  os << "wall_clock_s " << s.wall_clock_s << '\n';
  os << "gated_step_s " << s.gated_step_s << '\n';
  os << "standard_step_s " << s.standard_step_s << '\n';
  if (s.wall_clock_ratio) {
    os << "reference_wall_clock_s " << *s.reference_wall_clock_s << '\n';
    os << "wall_clock_ratio " << *s.wall_clock_ratio << '\n';
  }
  return os.str();
}

double replay_query_ratio(std::span<const double> batch_scores, double tau) {
  if (batch_scores.empty()) return 0.0;
  std::size_t q = 0;
  for (double s : batch_scores) q += gate_decision(s, tau) ? 1 : 0;
  return static_cast<double>(q) / static_cast<double>(batch_scores.size());
}

}  // namespace scnas
