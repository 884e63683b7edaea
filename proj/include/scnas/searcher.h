// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "scnas/cost.h"
#include "scnas/datasynth.h"
#include "scnas/space.h"
#include "scnas/supernet.h"

namespace scnas {

struct SearchConstraints {
  double max_latency_ms = 5000.0;         // real time for a 5 s segment
  double max_daily_energy_mwh = 8400.0;   // 700 mW over 12 h
  double theta = kDefaultBottleneckTheta;
};

void validate_constraints(const SearchConstraints& c);

struct Candidate {
  SubnetConfig config;
  double error = 0;
  CostEstimate cost;
  bool feasible = false;
};

// Total order used for ranking: error, latency, daily energy, then encoding.
bool candidate_less(const Candidate& a, const Candidate& b, const SearchSpace& space);

// a <= b on error, latency and daily energy, and < on at least one.
bool dominates(const Candidate& a, const Candidate& b);

// Non-dominated subset, minimizing all three axes. Candidates with the same
// config are collapsed to the first occurrence. Output keeps input order.
std::vector<Candidate> pareto_front(const std::vector<Candidate>& candidates);

using ErrorFunction = std::function<double(const SubnetConfig&)>;

// Scores configs and memoizes results by encoding. Thread-safe.
class FitnessEvaluator {
 public:
  FitnessEvaluator(SearchSpace space, ErrorFunction error, const CostProfile& profile,
                   SearchConstraints constraints, std::size_t cost_input_len = 80000,
                   DutyCycle duty = {});

  // Error measured on `val` with weights sliced from `net`.
  static FitnessEvaluator for_supernet(const Supernet& net, const LabeledSet& val,
                                       const CostProfile& profile, SearchConstraints constraints,
                                       std::size_t cost_input_len = 80000, int workers = 0);

  Candidate evaluate(const SubnetConfig& config);
  bool cached(const SubnetConfig& config) const;

  // Cost-side feasibility only: bottleneck rule plus both budgets.
  bool feasible(const SubnetConfig& config) const;
  // Bottleneck rule alone.
  bool valid(const SubnetConfig& config) const;

  const SearchSpace& space() const { return space_; }
  const SearchConstraints& constraints() const { return constraints_; }
  std::size_t error_evaluations() const { return misses_; }
  std::size_t cache_hits() const { return hits_; }

 private:
  SearchSpace space_;
  ErrorFunction error_;
  const CostProfile* profile_;
  SearchConstraints constraints_;
  CostContext ctx_;
  mutable std::mutex mu_;
  std::map<std::string, Candidate> cache_;
  std::size_t misses_ = 0;
  std::size_t hits_ = 0;
};

struct EvolutionParams {
  int population = 64;
  int generations = 30;
  double mutation_rate = 0.1;
  double crossover_rate = 0.5;
  int tournament = 3;
  // Times a child already seen is mutated again in search of an unseen one.
  int novelty_retries = 10;
  int workers = 1;
};

void validate_evolution_params(const EvolutionParams& p);

struct HistoryEntry {
  int generation = 0;
  Candidate candidate;
};

struct SearchResult {
  Candidate best;
  std::vector<HistoryEntry> history;
  std::vector<Candidate> pareto;
};

// Elitist (mu + lambda) evolution over the gene encoding. Throws
// "infeasible constraints" if no feasible config turns up in 1000 probes.
SearchResult evolutionary_search(FitnessEvaluator& fitness, const EvolutionParams& params,
                                 std::uint64_t seed);

SearchResult random_search(FitnessEvaluator& fitness, int samples, std::uint64_t seed);

inline constexpr std::uint64_t kDefaultExhaustiveCap = 10000;

// Evaluates every config that passes the bottleneck rule; `pareto` covers all
// of them, `best` only the feasible ones.
SearchResult exhaustive_search(FitnessEvaluator& fitness, std::uint64_t cap = kDefaultExhaustiveCap);

std::string search_report(const SearchResult& result, const std::string& mode);
std::string pareto_csv(const std::vector<Candidate>& front);
std::string history_text(const std::vector<HistoryEntry>& history);
// Inverse of history_text. Per-op costs and energy in mJ are not recorded and
// come back empty.
std::vector<HistoryEntry> parse_history_text(const std::string& text);

}  // namespace scnas
