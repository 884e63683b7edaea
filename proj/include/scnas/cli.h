// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scnas/cost.h"
#include "scnas/datasynth.h"
#include "scnas/distill.h"
#include "scnas/searcher.h"
#include "scnas/space.h"
#include "scnas/trainer.h"

namespace scnas {

// Every knob of a pipeline run. Built from JSON layered over the defaults;
// `json` holds the fully resolved document that gets written next to outputs.
struct RunConfig {
  nlohmann::json json;

  std::string output_dir;
  int workers = 0;
  SearchSpace space;

  DatasetConfig dataset;
  std::string dataset_dir;  // resolved; defaults to <output_dir>/data

  TrainConfig teacher;
  SubnetConfig teacher_config;
  std::string teacher_checkpoint;  // resolved; defaults to <output_dir>/teacher/model.ckpt

  TrainConfig supernet;
  std::uint64_t supernet_init_seed = 11;
  int panel_size = 8;
  std::uint64_t panel_seed = 99;
  std::string panel_split = "val";

  std::string cost_profile;  // empty: built-in reference device model
  std::size_t cost_input_len = 80000;
  DutyCycle duty;
  SearchConstraints constraints;

  std::string search_mode = "evolutionary";
  EvolutionParams evolution;
  int random_samples = 100;
  std::uint64_t exhaustive_cap = kDefaultExhaustiveCap;
  int val_limit = 0;
  std::uint64_t search_seed = 1;

  std::string eval_config;  // empty: best config of the last search
  std::string eval_split = "test";
  int random_baselines = 10;
  std::uint64_t baseline_seed = 5;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json default_config_json();

// Merges `user` over the defaults, then applies "dotted.key=value" overrides
// (value parsed as JSON, falling back to a plain string). Unknown keys and
// type mismatches throw ConfigError.
RunConfig resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

// "inf", "+inf", "-inf" or a number.
double parse_tau(const std::string& text);
std::string tau_label(double tau);

// Profile named by the config, or the reference device model.
CostProfile load_cost_profile(const RunConfig& cfg);

// Validation split truncated to val_limit examples (0 keeps all).
LabeledSet search_validation_set(const RunConfig& cfg);

struct SupernetRun {
  double tau = 0;
  std::string dir;
  LedgerSummary summary;
  double panel_error = 0;
};

// Trains the supernet at `tau` into `dir` (model.ckpt, ledger.txt,
// history.tsv, train.log). With `resume` an existing checkpoint there is
// continued. Loads the teacher checkpoint only when tau < +inf.
SupernetRun train_supernet_run(const RunConfig& cfg, double tau, const std::string& dir,
                               bool resume, std::ostream& out);

struct EvalReport {
  SubnetConfig config;
  double test_error = 0;
  double val_error = 0;
  std::optional<double> fitness_error;  // as cached by the last search, if present
  CostEstimate cost;
  bool feasible = false;
  std::vector<double> baseline_errors;
  double baseline_mean = 0;
};

std::string eval_report_text(const EvalReport& r);

// Runs the scnas command line. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// Arguments without the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scnas
