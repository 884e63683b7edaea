// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/trainer.h"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <memory>
#include <numeric>
#include <sstream>

#include "scnas/parallel.h"
#include "scnas/random.h"

namespace scnas {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "single_path") return SamplingMode::kSinglePath;
  if (name == "fixed") return SamplingMode::kFixed;
  throw std::invalid_argument("unknown sampling mode '" + name + "' (expected single_path or fixed)");
}

std::string to_string(SamplingMode mode) {
  return mode == SamplingMode::kSinglePath ? "single_path" : "fixed";
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("train epochs must be non-negative");
  if (cfg.batch_size < 1) throw std::invalid_argument("train batch_size must be at least 1");
  if (!(cfg.optimizer.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(cfg.lr_decay > 0 && cfg.lr_decay <= 1)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
  if (cfg.stabilize_every < 0) throw std::invalid_argument("stabilize_every must be non-negative");
  validate_kd_config(cfg.kd);
}

int decay_epoch(int epochs) { return static_cast<int>(std::ceil(0.75 * epochs)); }

Trainer::Trainer(Supernet& net, TrainConfig cfg, ConfigFilter accept, TeacherHandle* teacher)
    : net_(net),
      cfg_(std::move(cfg)),
      accept_(std::move(accept)),
      teacher_(teacher),
      opt_(net.params(), cfg_.optimizer) {
  validate_train_config(cfg_);
}

void Trainer::set_progress(const TrainProgress& p) {
  if (p.epochs_done < 0) throw std::invalid_argument("negative epoch count in progress");
  progress_ = p;
}

SubnetConfig Trainer::config_for_step(std::uint64_t step) const {
  if (cfg_.sampling == SamplingMode::kFixed) return max_config(net_.space());
  std::mt19937_64 rng(derive_seed(cfg_.seed, 0xc0f16, step));
  return sample_uniform(net_.space(), rng, accept_);
}

std::vector<std::size_t> Trainer::epoch_order(int epoch, std::size_t n) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg_.seed, 0x0dde, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

void Trainer::run(const LabeledSet& data, std::ostream* log) {
  if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  const int workers = cfg_.workers > 0 ? cfg_.workers : default_workers();
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), bs);
  if (worker_grads_.size() != w) {
    worker_grads_.clear();
    for (std::size_t i = 0; i < w; ++i) worker_grads_.emplace_back(net_.params());
  }
  const double base_lr = cfg_.optimizer.learning_rate;
  for (int epoch = progress_.epochs_done; epoch < cfg_.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    opt_.set_learning_rate(epoch >= decay_epoch(cfg_.epochs) ? base_lr * cfg_.lr_decay : base_lr);
    const auto order = epoch_order(epoch, n);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(bs, n - start));
      const std::uint64_t step = progress_.steps_done;
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      const SubnetConfig config = config_for_step(step);
      rec.config = to_string(config);
      const auto s0 = std::chrono::steady_clock::now();
      train_step(data, batch, config, true, rec);
      if (cfg_.stabilize_every > 0 && (step + 1) % static_cast<std::uint64_t>(cfg_.stabilize_every) == 0) {
        StepRecord extra;
        train_step(data, batch, max_config(net_.space()), false, extra);
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
      ledger_.record(rec.queried, secs);
      history_.push_back(rec);
      if (log) {
        *log << "step " << step << " epoch " << epoch << " loss " << std::setprecision(6)
             << rec.loss << " score " << rec.batch_score << " queried " << rec.queried
             << " config " << rec.config << '\n';
      }
      loss_sum += rec.loss;
      ++steps;
      ++progress_.steps_done;
    }
    progress_.epochs_done = epoch + 1;
    if (on_epoch_) on_epoch_(*this);
    if (log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *log << "epoch " << epoch << " mean_loss " << std::setprecision(6)
           << loss_sum / static_cast<double>(steps) << " lr " << opt_.config().learning_rate
           << " seconds " << std::setprecision(3) << std::fixed << secs << std::defaultfloat
           << std::endl;
    }
  }
}

void Trainer::train_step(const LabeledSet& data, std::span<const std::size_t> batch,
                         const SubnetConfig& config, bool allow_kd, StepRecord& rec) {
  const std::size_t b = batch.size();
  const std::size_t w = std::min(worker_grads_.size(), b);
  const std::size_t classes = static_cast<std::size_t>(net_.space().num_classes);
  std::vector<std::unique_ptr<Graph<float>>> graphs(b);
  std::vector<Var> outs(b);
  std::vector<double> scores(b);
  const auto prior = uniform_prior(classes);
  for (auto& g : worker_grads_) g.zero();

  auto chunk = [&](std::size_t t, auto&& fn) {
    for (std::size_t i = b * t / w; i < b * (t + 1) / w; ++i) fn(i);
  };
  parallel_for(w, static_cast<int>(w), [&](std::size_t t) {
    chunk(t, [&](std::size_t i) {
      graphs[i] = std::make_unique<Graph<float>>(&net_.params(), &worker_grads_[t]);
      outs[i] = net_.forward(*graphs[i], config, data.inputs[batch[i]]);
      const auto& z = graphs[i]->value(outs[i]);
      std::vector<double> zd(z.data(), z.data() + z.size());
      const auto p = softmax<double>(zd);
      scores[i] = sample_uncertainty(p, prior, cfg_.kd.epsilon);
    });
  });
  rec.batch_score = batch_uncertainty(scores);
  rec.queried = allow_kd && teacher_ != nullptr && gate_decision(rec.batch_score, cfg_.kd.tau);
  std::vector<std::vector<float>> teacher_logits;
  if (rec.queried) {
    std::vector<std::span<const float>> inputs;
    for (std::size_t i = 0; i < b; ++i) inputs.emplace_back(data.inputs[batch[i]]);
    teacher_logits = teacher_->query(inputs);
  }
  std::vector<double> losses(b);
  const float inv_b = 1.0f / static_cast<float>(b);
  parallel_for(w, static_cast<int>(w), [&](std::size_t t) {
    chunk(t, [&](std::size_t i) {
      auto& g = *graphs[i];
      const auto label = static_cast<std::size_t>(data.labels[batch[i]]);
      Var loss = rec.queried ? kd_loss<float>(g, outs[i], teacher_logits[i], label, cfg_.kd)
                             : g.softmax_cross_entropy(outs[i], label);
      losses[i] = g.value(loss)[0];
      g.backward(g.scale(loss, inv_b));
      graphs[i].reset();
    });
  });
  double total = 0;
  for (double l : losses) total += l;
  rec.loss = total / static_cast<double>(b);
  if (!std::isfinite(rec.loss)) {
    throw std::runtime_error("non-finite loss at step " + std::to_string(rec.step) + " (epoch " +
                             std::to_string(rec.epoch) + ") with config " + to_string(config));
  }
  for (std::size_t t = 1; t < w; ++t) worker_grads_[0].accumulate(worker_grads_[t]);
  opt_.step(net_.params(), worker_grads_[0]);
}

Supernet train_standalone(const SearchSpace& space, const SubnetConfig& config,
                          const LabeledSet& data, const TrainConfig& cfg, std::ostream* log) {
  validate_train_config(cfg);
  Supernet net(singleton_space(config, space), cfg.seed);
  if (cfg.epochs == 0) return net;
  TrainConfig fixed = cfg;
  fixed.sampling = SamplingMode::kFixed;
  Trainer trainer(net, fixed);
  trainer.run(data, log);
  return net;
}

std::vector<SubnetConfig> evaluation_panel(const SearchSpace& space, int size, std::uint64_t seed,
                                           const ConfigFilter& accept) {
  if (size < 1) throw std::invalid_argument("evaluation panel size must be positive");
  std::mt19937_64 rng(derive_seed(seed, 0x9a7e1));
  std::vector<SubnetConfig> out;
  const auto card = space_cardinality(space);
  for (int tries = 0; static_cast<int>(out.size()) < size && tries < 100 * size; ++tries) {
    SubnetConfig c = sample_uniform(space, rng, accept);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
    if (out.size() == card) break;
  }
  return out;
}

double panel_error(const Supernet& net, const std::vector<SubnetConfig>& panel,
                   const LabeledSet& data, int workers) {
  if (panel.empty()) throw std::invalid_argument("panel_error: empty panel");
  double sum = 0;
  for (const auto& c : panel) sum += evaluate(net, c, data, workers);
  return sum / static_cast<double>(panel.size());
}

int predict_class(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("predict_class: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

std::vector<int> predict(const Supernet& net, const SubnetConfig& config, const LabeledSet& data,
                         int workers) {
  std::vector<int> out(data.size());
  parallel_for(data.size(), workers > 0 ? workers : default_workers(), [&](std::size_t i) {
    out[i] = predict_class(net.logits(config, data.inputs[i]));
  });
  return out;
}

double evaluate(const Supernet& net, const SubnetConfig& config, const LabeledSet& data,
                int workers) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: dataset is empty");
  const auto pred = predict(net, config, data, workers);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != data.labels[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

NetworkTeacher::NetworkTeacher(const Supernet& net, SubnetConfig config, int workers)
    : net_(net), config_(std::move(config)), workers_(workers) {
  if (!is_member(config_, net_.space())) {
    throw std::invalid_argument("teacher config " + to_string(config_) + " is not in its space");
  }
}

std::vector<std::vector<float>> NetworkTeacher::run(
    const std::vector<std::span<const float>>& batch) {
  std::vector<std::vector<float>> out(batch.size());
  parallel_for(batch.size(), workers_ > 0 ? workers_ : default_workers(),
               [&](std::size_t i) { out[i] = net_.logits(config_, batch[i]); });
  return out;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'C', 'N', 'A', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kMaxRank = 8;

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  bool has(std::size_t n) const { return b_.size() - pos_ >= n; }
  template <typename U>
  U get() {
    U v;
    std::memcpy(&v, b_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void copy(void* dst, std::size_t n) {
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

CheckpointError header_error(const std::string& what) {
  return CheckpointError(CheckpointError::Kind::kCorruptHeader, "corrupt checkpoint header: " + what);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.config_text.size());
  out.insert(out.end(), ckpt.config_text.begin(), ckpt.config_text.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data());
    out.insert(out.end(), p, p + t.size() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.has(sizeof(kMagic)) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw header_error("bad magic");
  }
  r.str(sizeof(kMagic));
  if (!r.has(4)) throw header_error("missing version");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          "checkpoint version mismatch: file has version " +
                              std::to_string(version) + ", this build reads version " +
                              std::to_string(kCheckpointVersion));
  }
  if (!r.has(8)) throw header_error("missing config length");
  const auto text_len = r.get<std::uint64_t>();
  if (!r.has(text_len)) throw header_error("config length exceeds file size");
  Checkpoint ckpt;
  ckpt.config_text = r.str(text_len);
  if (!r.has(4)) throw header_error("missing tensor count");
  const auto count = r.get<std::uint32_t>();
  auto truncated = [](std::uint32_t i, const std::string& name) {
    return CheckpointError(CheckpointError::Kind::kTruncated,
                           "truncated tensor data: tensor " + std::to_string(i) +
                               (name.empty() ? "" : " ('" + name + "')") + " ends early");
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!r.has(4)) throw truncated(i, "");
    const auto name_len = r.get<std::uint32_t>();
    if (!r.has(name_len)) throw truncated(i, "");
    std::string name = r.str(name_len);
    if (!r.has(4)) throw truncated(i, name);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > kMaxRank) {
      throw header_error("tensor '" + name + "' has rank " + std::to_string(rank));
    }
    if (!r.has(8ull * rank)) throw truncated(i, name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    const std::size_t numel = shape_numel(shape);
    if (numel > r.remaining() / sizeof(float)) throw truncated(i, name);
    Tensor<float> t(shape);
    r.copy(t.data(), numel * sizeof(float));
    if (!ckpt.tensors.emplace(name, std::move(t)).second) {
      throw header_error("duplicate tensor '" + name + "'");
    }
  }
  if (r.remaining() != 0) {
    throw header_error(std::to_string(r.remaining()) + " trailing bytes after the last tensor");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write checkpoint '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError(CheckpointError::Kind::kIo, "cannot move checkpoint into '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), path + ": " + e.what());
  }
}

Checkpoint make_model_checkpoint(const Supernet& net, const std::string& run_text,
                                 const Optimizer<float>* opt, const TrainProgress& progress) {
  Checkpoint ckpt;
  std::ostringstream os;
  os << "[space]\n" << space_to_text(net.space());
  os << "[progress]\n";
  os << "epochs_done " << progress.epochs_done << '\n';
  os << "steps_done " << progress.steps_done << '\n';
  if (opt) {
    os << "optimizer " << to_string(opt->config().kind) << '\n';
    os << "optimizer_steps " << opt->step_count() << '\n';
  }
  os << "[run]\n" << run_text;
  ckpt.config_text = os.str();
  const auto& params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.emplace(params.name(i), params.value(i));
  }
  if (opt) {
    for (std::size_t i = 0; i < opt->moment_count(); ++i) {
      ckpt.tensors.emplace("opt.m/" + params.name(i), opt->first_moment(i));
      ckpt.tensors.emplace("opt.v/" + params.name(i), opt->second_moment(i));
    }
  }
  return ckpt;
}

namespace {

struct Sections {
  std::string space;
  std::map<std::string, std::string> progress;
  std::string run;
};

Sections split_sections(const std::string& text) {
  Sections s;
  const auto space_at = text.find("[space]\n");
  const auto prog_at = text.find("[progress]\n");
  const auto run_at = text.find("[run]\n");
  if (space_at != 0 || prog_at == std::string::npos || run_at == std::string::npos ||
      prog_at > run_at) {
    throw header_error("embedded config lacks [space]/[progress]/[run] sections");
  }
  s.space = text.substr(8, prog_at - 8);
  std::istringstream prog(text.substr(prog_at + 11, run_at - prog_at - 11));
  std::string key, value;
  while (prog >> key >> value) s.progress[key] = value;
  s.run = text.substr(run_at + 6);
  return s;
}

}  // namespace

ModelCheckpoint restore_model(const Checkpoint& ckpt) {
  const Sections s = split_sections(ckpt.config_text);
  SearchSpace space = space_from_text(s.space);
  ParameterSet<float> params;
  bool has_opt = false;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("opt.", 0) == 0) {
      has_opt = true;
      continue;
    }
    params.add(name, t);
  }
  TrainProgress progress;
  try {
    if (s.progress.count("epochs_done")) progress.epochs_done = std::stoi(s.progress.at("epochs_done"));
    if (s.progress.count("steps_done")) progress.steps_done = std::stoull(s.progress.at("steps_done"));
  } catch (const std::logic_error&) {
    throw header_error("malformed [progress] section");
  }
  return ModelCheckpoint{Supernet(std::move(space), std::move(params)), s.run, progress,
                         has_opt || s.progress.count("optimizer") > 0};
}

void restore_optimizer(const Checkpoint& ckpt, const Supernet& net, Optimizer<float>& opt) {
  const Sections s = split_sections(ckpt.config_text);
  const auto kind = s.progress.find("optimizer");
  if (kind == s.progress.end()) {
    throw std::runtime_error("checkpoint holds no optimizer state; cannot resume");
  }
  if (parse_optimizer_kind(kind->second) != opt.config().kind) {
    throw std::runtime_error("checkpoint optimizer '" + kind->second + "' differs from configured '" +
                             to_string(opt.config().kind) + "'");
  }
  const auto& params = net.params();
  for (std::size_t i = 0; i < opt.moment_count(); ++i) {
    const auto m = ckpt.tensors.find("opt.m/" + params.name(i));
    const auto v = ckpt.tensors.find("opt.v/" + params.name(i));
    if (m == ckpt.tensors.end() || v == ckpt.tensors.end()) {
      throw std::runtime_error("checkpoint lacks optimizer moments for '" + params.name(i) + "'");
    }
    if (m->second.shape() != params.value(i).shape() || v->second.shape() != params.value(i).shape()) {
      throw std::runtime_error("optimizer moment shape mismatch for '" + params.name(i) + "'");
    }
    opt.first_moment(i) = m->second;
    opt.second_moment(i) = v->second;
  }
  try {
    opt.set_step_count(std::stoull(s.progress.at("optimizer_steps")));
  } catch (const std::exception&) {
    throw header_error("missing or malformed optimizer_steps");
  }
}

}  // namespace scnas
