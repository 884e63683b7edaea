// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/searcher.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scnas/parallel.h"
#include "scnas/random.h"
#include "scnas/trainer.h"

namespace scnas {

void validate_constraints(const SearchConstraints& c) {
  if (!(c.max_latency_ms > 0)) throw std::invalid_argument("max_latency_ms must be positive");
  if (!(c.max_daily_energy_mwh > 0)) throw std::invalid_argument("max_daily_energy_mwh must be positive");
  if (!(c.theta > 0 && c.theta <= 1)) throw std::invalid_argument("bottleneck theta must lie in (0, 1]");
}

bool candidate_less(const Candidate& a, const Candidate& b, const SearchSpace& space) {
  if (a.error != b.error) return a.error < b.error;
  if (a.cost.latency_ms != b.cost.latency_ms) return a.cost.latency_ms < b.cost.latency_ms;
  if (a.cost.daily_energy_mwh != b.cost.daily_energy_mwh) {
    return a.cost.daily_energy_mwh < b.cost.daily_energy_mwh;
  }
  return encode(a.config, space) < encode(b.config, space);
}

bool dominates(const Candidate& a, const Candidate& b) {
  const bool le = a.error <= b.error && a.cost.latency_ms <= b.cost.latency_ms &&
                  a.cost.daily_energy_mwh <= b.cost.daily_energy_mwh;
  const bool lt = a.error < b.error || a.cost.latency_ms < b.cost.latency_ms ||
                  a.cost.daily_energy_mwh < b.cost.daily_energy_mwh;
  return le && lt;
}

std::vector<Candidate> pareto_front(const std::vector<Candidate>& candidates) {
  std::vector<std::size_t> unique;
  std::set<SubnetConfig> seen;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (seen.insert(candidates[i].config).second) unique.push_back(i);
  }
  // Sweep in lexicographic objective order: a point can only be dominated by
  // one that sorts before it, and any dominator is dominated by (or is) a
  // front member seen earlier.
  std::vector<std::size_t> order = unique;
  auto key = [&](std::size_t i) {
    const auto& c = candidates[i];
    return std::tuple(c.error, c.cost.latency_ms, c.cost.daily_energy_mwh);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    bool dominated = false;
    for (std::size_t f : front) {
      if (dominates(candidates[f], candidates[i])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  std::vector<Candidate> out;
  for (std::size_t i : front) out.push_back(candidates[i]);
  return out;
}

FitnessEvaluator::FitnessEvaluator(SearchSpace space, ErrorFunction error,
                                   const CostProfile& profile, SearchConstraints constraints,
                                   std::size_t cost_input_len, DutyCycle duty)
    : space_(std::move(space)),
      error_(std::move(error)),
      profile_(&profile),
      constraints_(constraints) {
  validate_space(space_);
  validate_constraints(constraints_);
  if (!error_) throw std::invalid_argument("fitness: error function is empty");
  ctx_.profile = profile_;
  ctx_.input_len = cost_input_len;
  ctx_.duty = duty;
  ctx_.theta = constraints_.theta;
}

FitnessEvaluator FitnessEvaluator::for_supernet(const Supernet& net, const LabeledSet& val,
                                                const CostProfile& profile,
                                                SearchConstraints constraints,
                                                std::size_t cost_input_len, int workers) {
  if (val.size() == 0) throw std::invalid_argument("fitness: validation data is empty");
  return FitnessEvaluator(
      net.space(),
      [&net, &val, workers](const SubnetConfig& c) { return scnas::evaluate(net, c, val, workers); },
      profile, constraints, cost_input_len);
}

bool FitnessEvaluator::valid(const SubnetConfig& config) const {
  return validate_config(config, space_, ctx_);
}

bool FitnessEvaluator::feasible(const SubnetConfig& config) const {
  if (!valid(config)) return false;
  const auto cost = model_cost(*profile_, config, space_, ctx_.input_len, ctx_.duty);
  return cost.latency_ms <= constraints_.max_latency_ms &&
         cost.daily_energy_mwh <= constraints_.max_daily_energy_mwh;
}

bool FitnessEvaluator::cached(const SubnetConfig& config) const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.count(encoding_key(encode(config, space_))) != 0;
}

Candidate FitnessEvaluator::evaluate(const SubnetConfig& config) {
  const std::string key = encoding_key(encode(config, space_));
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  Candidate c;
  c.config = config;
  c.cost = model_cost(*profile_, config, space_, ctx_.input_len, ctx_.duty);
  c.feasible = valid(config) && c.cost.latency_ms <= constraints_.max_latency_ms &&
               c.cost.daily_energy_mwh <= constraints_.max_daily_energy_mwh;
  c.error = error_(config);
  std::lock_guard<std::mutex> lock(mu_);
  const auto [it, inserted] = cache_.emplace(key, c);
  if (inserted) ++misses_;
  return it->second;
}

void validate_evolution_params(const EvolutionParams& p) {
  if (p.population < 2) throw std::invalid_argument("evolution population must be at least 2");
  if (p.generations < 0) throw std::invalid_argument("evolution generations must be non-negative");
  if (!(p.mutation_rate >= 0 && p.mutation_rate <= 1)) {
    throw std::invalid_argument("mutation rate must lie in [0, 1]");
  }
  if (!(p.crossover_rate >= 0 && p.crossover_rate <= 1)) {
    throw std::invalid_argument("crossover rate must lie in [0, 1]");
  }
  if (p.tournament < 1) throw std::invalid_argument("tournament size must be at least 1");
  if (p.novelty_retries < 0) throw std::invalid_argument("novelty retries must be non-negative");
}

namespace {

std::vector<int> gene_arity(const SearchSpace& space) {
  std::vector<int> out;
  for (const auto& st : space.stages) {
    out.push_back(static_cast<int>(st.channels.size()));
    out.push_back(static_cast<int>(st.repeats.size()));
    out.push_back(static_cast<int>(st.kernels.size()));
  }
  return out;
}

SubnetConfig sample_feasible(const FitnessEvaluator& fitness, std::mt19937_64& rng) {
  try {
    return sample_uniform(fitness.space(), rng,
                          [&](const SubnetConfig& c) { return fitness.feasible(c); });
  } catch (const std::runtime_error&) {
    throw std::runtime_error("infeasible constraints: no feasible config found in " +
                             std::to_string(kMaxSampleRetries) + " probes");
  }
}

// Scores `configs` (concurrently when asked) and appends them to the history
// in the given order.
std::vector<Candidate> score(FitnessEvaluator& fitness, const std::vector<SubnetConfig>& configs,
                             int generation, int workers, std::vector<HistoryEntry>& history) {
  std::vector<Candidate> out(configs.size());
  parallel_for(configs.size(), workers,
               [&](std::size_t i) { out[i] = fitness.evaluate(configs[i]); });
  for (const auto& c : out) history.push_back({generation, c});
  return out;
}

void finish(SearchResult& r, const SearchSpace& space) {
  std::vector<Candidate> all;
  bool found = false;
  for (const auto& h : r.history) {
    all.push_back(h.candidate);
    if (h.candidate.feasible && (!found || candidate_less(h.candidate, r.best, space))) {
      r.best = h.candidate;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("infeasible constraints: no evaluated config is feasible");
  r.pareto = pareto_front(all);
}

}  // namespace

SearchResult evolutionary_search(FitnessEvaluator& fitness, const EvolutionParams& params,
                                 std::uint64_t seed) {
  validate_evolution_params(params);
  const SearchSpace& space = fitness.space();
  const auto arity = gene_arity(space);
  std::mt19937_64 rng(derive_seed(seed, 0xe70));
  SearchResult result;
  const std::size_t pop_size = static_cast<std::size_t>(params.population);

  std::vector<SubnetConfig> init;
  std::set<SubnetConfig> init_seen;
  for (int tries = 0; init.size() < pop_size && tries < 4 * params.population; ++tries) {
    SubnetConfig c = sample_feasible(fitness, rng);
    if (init_seen.insert(c).second) init.push_back(std::move(c));
  }
  std::vector<Candidate> pop = score(fitness, init, 0, params.workers, result.history);

  auto rank = [&](std::vector<Candidate>& v) {
    std::sort(v.begin(), v.end(),
              [&](const Candidate& a, const Candidate& b) { return candidate_less(a, b, space); });
  };
  auto tournament = [&]() -> const Candidate& {
    std::size_t best = uniform_index(rng, pop.size());
    for (int t = 1; t < params.tournament; ++t) {
      const std::size_t j = uniform_index(rng, pop.size());
      if (candidate_less(pop[j], pop[best], space)) best = j;
    }
    return pop[best];
  };
  auto mutate = [&](std::vector<int>& genes) {
    for (std::size_t g = 0; g < genes.size(); ++g) {
      if (arity[g] > 1 && uniform01(rng) < params.mutation_rate) {
        genes[g] = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(arity[g])));
      }
    }
  };

  for (int gen = 1; gen <= params.generations; ++gen) {
    std::vector<SubnetConfig> children;
    std::set<SubnetConfig> in_batch;
    while (children.size() < pop_size) {
      SubnetConfig child;
      bool ok = false;
      for (int attempt = 0; attempt < kMaxSampleRetries && !ok; ++attempt) {
        const auto a = encode(tournament().config, space);
        const auto b = encode(tournament().config, space);
        std::vector<int> genes = a;
        for (std::size_t g = 0; g < genes.size(); ++g) {
          if (uniform01(rng) < params.crossover_rate) genes[g] = b[g];
        }
        mutate(genes);
        for (int r = 0; r < params.novelty_retries; ++r) {
          const SubnetConfig c = decode(genes, space);
          if (!fitness.cached(c) && !in_batch.count(c)) break;
          mutate(genes);
        }
        child = decode(genes, space);
        ok = fitness.feasible(child);
      }
      if (!ok) child = sample_feasible(fitness, rng);
      in_batch.insert(child);
      children.push_back(std::move(child));
    }
    std::vector<Candidate> scored = score(fitness, children, gen, params.workers, result.history);
    std::vector<Candidate> merged = pop;
    merged.insert(merged.end(), scored.begin(), scored.end());
    rank(merged);
    pop.clear();
    std::set<SubnetConfig> kept;
    for (auto& c : merged) {
      if (pop.size() == pop_size) break;
      if (kept.insert(c.config).second) pop.push_back(std::move(c));
    }
  }
  finish(result, space);
  return result;
}

SearchResult random_search(FitnessEvaluator& fitness, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("random search needs at least one sample");
  std::mt19937_64 rng(derive_seed(seed, 0x7a4d));
  std::vector<SubnetConfig> configs;
  for (int i = 0; i < samples; ++i) configs.push_back(sample_feasible(fitness, rng));
  SearchResult result;
  score(fitness, configs, 0, 1, result.history);
  finish(result, fitness.space());
  return result;
}

SearchResult exhaustive_search(FitnessEvaluator& fitness, std::uint64_t cap) {
  const auto all = enumerate_space(fitness.space(), cap);
  std::vector<SubnetConfig> valid;
  for (const auto& c : all) {
    if (fitness.valid(c)) valid.push_back(c);
  }
  SearchResult result;
  score(fitness, valid, 0, 1, result.history);
  finish(result, fitness.space());
  return result;
}

std::string search_report(const SearchResult& r, const std::string& mode) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "mode " << mode << '\n';
  os << "best_config " << to_string(r.best.config) << '\n';
  os << "error " << r.best.error << '\n';
  os << "latency_ms " << r.best.cost.latency_ms << '\n';
  os << "energy_mj " << r.best.cost.energy_mj << '\n';
  os << "daily_energy_mwh " << r.best.cost.daily_energy_mwh << '\n';
  os << "feasible " << (r.best.feasible ? 1 : 0) << '\n';
  os << "evaluated " << r.history.size() << '\n';
  os << "pareto_size " << r.pareto.size() << '\n';
  return os.str();
}

std::string pareto_csv(const std::vector<Candidate>& front) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "config,error,latency_ms,daily_energy_mwh\n";
  for (const auto& c : front) {
    os << to_string(c.config) << ',' << c.error << ',' << c.cost.latency_ms << ','
       << c.cost.daily_energy_mwh << '\n';
  }
  return os.str();
}

std::string history_text(const std::vector<HistoryEntry>& history) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# generation config error latency_ms daily_energy_mwh feasible\n";
  for (const auto& h : history) {
    os << h.generation << ' ' << to_string(h.candidate.config) << ' ' << h.candidate.error << ' '
       << h.candidate.cost.latency_ms << ' ' << h.candidate.cost.daily_energy_mwh << ' '
       << (h.candidate.feasible ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<HistoryEntry> parse_history_text(const std::string& text) {
  std::vector<HistoryEntry> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    HistoryEntry h;
    std::string config;
    int feasible = 0;
    if (!(ls >> h.generation >> config >> h.candidate.error >> h.candidate.cost.latency_ms >>
          h.candidate.cost.daily_energy_mwh >> feasible)) {
      throw std::runtime_error("search history line " + std::to_string(line_no) + ": malformed");
    }
    h.candidate.config = parse_config(config);
    h.candidate.feasible = feasible != 0;
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace scnas
