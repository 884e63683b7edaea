// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scnas/datasynth.h"
#include "scnas/distill.h"
#include "scnas/optimizer.h"
#include "scnas/space.h"
#include "scnas/supernet.h"

namespace scnas {

enum class SamplingMode { kSinglePath, kFixed };

SamplingMode parse_sampling_mode(const std::string& name);
std::string to_string(SamplingMode mode);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  OptimizerConfig optimizer;
  // Learning rate is multiplied by this factor from epoch ceil(0.75 * epochs).
  double lr_decay = 0.1;
  std::uint64_t seed = 1;
  KdConfig kd;
  SamplingMode sampling = SamplingMode::kSinglePath;
  // Every m steps also take a step on the max config; 0 disables.
  int stabilize_every = 0;
  int workers = 0;
};

void validate_train_config(const TrainConfig& cfg);

// Epoch at which the learning-rate decay kicks in.
int decay_epoch(int epochs);

struct StepRecord {
  std::uint64_t step = 0;
  int epoch = 0;
  double loss = 0;
  double batch_score = 0;
  bool queried = false;
  std::string config;
};

struct TrainProgress {
  int epochs_done = 0;
  std::uint64_t steps_done = 0;
};

// Drives single-path (or fixed-config) training of a supernet. Steps are
// sequential; within a step examples are split across workers and their
// gradients summed in worker order.
class Trainer {
 public:
  // `accept` filters sampled configs; `teacher` may be null.
  Trainer(Supernet& net, TrainConfig cfg, ConfigFilter accept = {},
          TeacherHandle* teacher = nullptr);

  // Trains until cfg.epochs are done, starting from progress().
  void run(const LabeledSet& data, std::ostream* log = nullptr);

  // Called after every completed epoch, e.g. to write a resumable checkpoint.
  void set_epoch_callback(std::function<void(const Trainer&)> fn) { on_epoch_ = std::move(fn); }

  const TrainProgress& progress() const { return progress_; }
  void set_progress(const TrainProgress& p);
  Optimizer<float>& optimizer() { return opt_; }
  const Optimizer<float>& optimizer() const { return opt_; }
  const Supernet& net() const { return net_; }
  const QueryLedger& ledger() const { return ledger_; }
  const std::vector<StepRecord>& history() const { return history_; }

  // Config sampled for a given global step; a pure function of seed and step.
  SubnetConfig config_for_step(std::uint64_t step) const;
  // Example order for an epoch; a pure function of seed and epoch.
  std::vector<std::size_t> epoch_order(int epoch, std::size_t n) const;

 private:
  void train_step(const LabeledSet& data, std::span<const std::size_t> batch,
                  const SubnetConfig& config, bool allow_kd, StepRecord& rec);

  Supernet& net_;
  TrainConfig cfg_;
  ConfigFilter accept_;
  TeacherHandle* teacher_;
  Optimizer<float> opt_;
  TrainProgress progress_;
  QueryLedger ledger_;
  std::vector<StepRecord> history_;
  std::vector<Gradients<float>> worker_grads_;
  std::function<void(const Trainer&)> on_epoch_;
};

// Fixed-architecture network initialized from `seed` and trained on `config`.
Supernet train_standalone(const SearchSpace& space, const SubnetConfig& config,
                          const LabeledSet& data, const TrainConfig& cfg,
                          std::ostream* log = nullptr);

// Fixed set of distinct configs drawn from `seed`, used to summarize a
// supernet by the mean error of its members.
std::vector<SubnetConfig> evaluation_panel(const SearchSpace& space, int size, std::uint64_t seed,
                                           const ConfigFilter& accept = {});
double panel_error(const Supernet& net, const std::vector<SubnetConfig>& panel,
                   const LabeledSet& data, int workers = 0);

// Predicted class: argmax, ties to the lower index.
int predict_class(std::span<const float> logits);

std::vector<int> predict(const Supernet& net, const SubnetConfig& config, const LabeledSet& data,
                         int workers = 0);
// Fraction misclassified. Throws on an empty dataset.
double evaluate(const Supernet& net, const SubnetConfig& config, const LabeledSet& data,
                int workers = 0);

// Runs a fixed-architecture network as a teacher.
class NetworkTeacher : public TeacherHandle {
 public:
  NetworkTeacher(const Supernet& net, SubnetConfig config, int workers = 0);

 protected:
  std::vector<std::vector<float>> run(const std::vector<std::span<const float>>& batch) override;

 private:
  const Supernet& net_;
  SubnetConfig config_;
  int workers_;
};

// ---- checkpoints ----

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kCorruptHeader, kVersionMismatch, kTruncated };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  std::string config_text;
  std::map<std::string, Tensor<float>> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Model checkpoints: the embedded text holds "[space]", "[progress]" and
// "[run]" sections; optimizer moments are stored as "opt.m/<name>" and
// "opt.v/<name>".
Checkpoint make_model_checkpoint(const Supernet& net, const std::string& run_text,
                                 const Optimizer<float>* opt = nullptr,
                                 const TrainProgress& progress = {});

struct ModelCheckpoint {
  Supernet net;
  std::string run_text;
  TrainProgress progress;
  bool has_optimizer = false;
};

ModelCheckpoint restore_model(const Checkpoint& ckpt);
// Copies the stored moments and step count into `opt`. Throws if absent.
void restore_optimizer(const Checkpoint& ckpt, const Supernet& net, Optimizer<float>& opt);

}  // namespace scnas
