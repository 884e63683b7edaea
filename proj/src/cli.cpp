// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/cli.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "scnas/gradcheck.h"
#include "scnas/random.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scnas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json train_defaults(int epochs, int batch, std::uint64_t seed) {
  return {{"epochs", epochs},         {"batch_size", batch}, {"optimizer", "adam"},
          {"learning_rate", 1e-3},    {"lr_decay", 0.1},     {"seed", seed}};
}

// Keys whose value may be of more than one JSON type.
bool free_form(const std::string& path) { return path == "space" || path == "supernet.tau"; }

bool same_kind(const json& a, const json& b) {
  if (a.is_number_integer()) return b.is_number_integer();
  if (a.is_number()) return b.is_number();
  return a.type() == b.type();
}

std::string type_name(const json& v) {
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

void merge(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config: " + (prefix.empty() ? "top level" : prefix) + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + path + "'");
    json& slot = base[it.key()];
    if (free_form(path)) {
      slot = it.value();
    } else if (slot.is_object()) {
      merge(slot, it.value(), path);
    } else if (!same_kind(slot, it.value())) {
      throw ConfigError("config: key '" + path + "' expects " + type_name(slot) + ", got " +
                        type_name(it.value()));
    } else {
      slot = it.value();
    }
  }
}

json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto p = parts.rbegin(); p != parts.rend(); ++p) {
    if (p->empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    patch = json{{*p, patch}};
  }
  return patch;
}

template <typename T>
T get(const json& j, const char* key) {
  return j.at(key).get<T>();
}

std::uint64_t get_seed(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto s = v.get<std::int64_t>();
  if (s < 0) throw ConfigError(std::string("config: ") + key + " must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int get_count(const json& j, const char* key, const std::string& section, int min) {
  const int v = get<int>(j, key);
  if (v < min) {
    throw ConfigError("config: " + section + "." + key + " must be at least " + std::to_string(min));
  }
  return v;
}

SearchSpace space_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw ConfigError("config: space must be \"default\" or an object");
    return default_search_space();
  }
  if (!j.is_object()) throw ConfigError("config: space must be \"default\" or an object");
  SearchSpace space;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "input_channels") {
      space.input_channels = it.value().get<int>();
    } else if (it.key() == "num_classes") {
      space.num_classes = it.value().get<int>();
    } else if (it.key() == "stages") {
      for (const auto& st : it.value()) {
        StageSpec s;
        for (auto f = st.begin(); f != st.end(); ++f) {
          if (f.key() == "channels") s.channels = f.value().get<std::vector<int>>();
          else if (f.key() == "repeats") s.repeats = f.value().get<std::vector<int>>();
          else if (f.key() == "kernels") s.kernels = f.value().get<std::vector<int>>();
          else if (f.key() == "stride") s.stride = f.value().get<int>();
          else throw ConfigError("config: unknown key 'space.stages[]." + f.key() + "'");
        }
        space.stages.push_back(std::move(s));
      }
    } else {
      throw ConfigError("config: unknown key 'space." + it.key() + "'");
    }
  }
  try {
    validate_space(space);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: space: ") + e.what());
  }
  return space;
}

TrainConfig train_from_json(const json& j, const std::string& section, int workers) {
  TrainConfig t;
  t.epochs = get_count(j, "epochs", section, 0);
  t.batch_size = get_count(j, "batch_size", section, 1);
  t.optimizer.kind = parse_optimizer_kind(get<std::string>(j, "optimizer"));
  t.optimizer.learning_rate = get<double>(j, "learning_rate");
  t.lr_decay = get<double>(j, "lr_decay");
  t.seed = get_seed(j, "seed");
  t.workers = workers;
  return t;
}

std::string join_path(const std::string& a, const std::string& b) { return (fs::path(a) / b).string(); }

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f.flush()) throw std::runtime_error("cannot write " + path);
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_resolved(const RunConfig& cfg, const std::string& dir) {
  write_file(join_path(dir, "config.json"), cfg.json.dump(2) + "\n");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Appends history lines to `path` and returns counts over the whole file.
LedgerSummary append_history(const std::string& path, const std::vector<StepRecord>& records,
                             bool append) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (!append) os << "# step epoch loss batch_score queried config\n";
  for (const auto& r : records) {
    os << r.step << ' ' << r.epoch << ' ' << r.loss << ' ' << r.batch_score << ' '
       << (r.queried ? 1 : 0) << ' ' << r.config << '\n';
  }
  std::string text = append && fs::exists(path) ? read_file(path) : std::string();
  text += os.str();
  write_file(path, text);
  LedgerSummary s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string step, epoch, loss, score;
    int queried = 0;
    ls >> step >> epoch >> loss >> score >> queried;
    ++s.total_batches;
    if (queried) ++s.queried_batches;
  }
  s.query_ratio = s.total_batches ? static_cast<double>(s.queried_batches) / s.total_batches : 0;
  return s;
}

struct TrainOutcome {
  std::vector<StepRecord> history;
  LedgerSummary ledger;
  bool resumed = false;
  double seconds = 0;
};

// Trains `net` with a checkpoint after every epoch. History and ledger cover
// this invocation only.
TrainOutcome train_checkpointed(std::unique_ptr<Supernet>& net, const TrainConfig& tc,
                                TeacherHandle* teacher, const LabeledSet& data,
                                const std::string& ckpt_path, const std::string& run_text,
                                bool resume, std::ostream& log) {
  TrainOutcome o;
  std::optional<Checkpoint> stored;
  TrainProgress progress;
  bool has_optimizer = false;
  if (resume && fs::exists(ckpt_path)) {
    stored = load_checkpoint(ckpt_path);
    auto m = restore_model(*stored);
    if (m.net.space() != net->space()) {
      throw std::runtime_error("cannot resume: " + ckpt_path + " holds a different search space");
    }
    net = std::make_unique<Supernet>(std::move(m.net));
    progress = m.progress;
    has_optimizer = m.has_optimizer;
    o.resumed = true;
  }
  Trainer trainer(*net, tc, {}, teacher);
  if (stored) {
    if (has_optimizer) restore_optimizer(*stored, *net, trainer.optimizer());
    trainer.set_progress(progress);
    log << "resumed at epoch " << progress.epochs_done << " step " << progress.steps_done << '\n';
  }
  trainer.set_epoch_callback([&](const Trainer& t) {
    save_checkpoint(ckpt_path, make_model_checkpoint(t.net(), run_text, &t.optimizer(), t.progress()));
  });
  const auto t0 = std::chrono::steady_clock::now();
  trainer.run(data, &log);
  o.seconds = seconds_since(t0);
  save_checkpoint(ckpt_path,
                  make_model_checkpoint(*net, run_text, &trainer.optimizer(), trainer.progress()));
  o.history = trainer.history();
  if (!trainer.history().empty()) o.ledger = ledger_report(trainer.ledger());
  return o;
}

Supernet load_supernet(const std::string& path) {
  return restore_model(load_checkpoint(path)).net;
}

std::string supernet_dir(const RunConfig& cfg) { return join_path(cfg.output_dir, "supernet"); }
std::string search_dir(const RunConfig& cfg) { return join_path(cfg.output_dir, "search"); }

Supernet load_trained_supernet(const RunConfig& cfg) {
  Supernet net = load_supernet(join_path(supernet_dir(cfg), "model.ckpt"));
  if (net.space() != cfg.space) {
    throw ConfigError("supernet checkpoint was trained on a different search space than configured");
  }
  return net;
}

// ---- commands ----

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto manifests = build_dataset(cfg.dataset, cfg.dataset_dir);
  write_resolved(cfg, cfg.dataset_dir);
  for (const auto& m : manifests) {
    std::vector<int> counts(kNumCountClasses, 0);
    for (const auto& e : m.entries) ++counts[e.label];
    out << m.split << ": " << m.entries.size() << " examples, per class";
    for (int c : counts) out << ' ' << c;
    out << '\n';
  }
  out << "dataset written to " << cfg.dataset_dir << " in " << fmt(seconds_since(t0), 3) << " s\n";
  return 0;
}

int cmd_train_teacher(const RunConfig& cfg, bool resume, std::ostream& out) {
  const std::string dir = fs::path(cfg.teacher_checkpoint).parent_path().string();
  fs::create_directories(dir.empty() ? "." : dir);
  write_resolved(cfg, dir.empty() ? "." : dir);
  const LabeledSet train = load_split(cfg.dataset_dir, "train");
  const LabeledSet test = load_split(cfg.dataset_dir, "test");
  TrainConfig tc = cfg.teacher;
  tc.sampling = SamplingMode::kFixed;
  auto net = std::make_unique<Supernet>(singleton_space(cfg.teacher_config, cfg.space), tc.seed);
  std::ofstream log(join_path(dir, "train.log"), resume ? std::ios::app : std::ios::trunc);
  const auto o = train_checkpointed(net, tc, nullptr, train, cfg.teacher_checkpoint, cfg.json.dump(),
                                    resume, log);
  const double err = evaluate(*net, net->only_config(), test, cfg.workers);
  std::ostringstream rep;
  rep << std::setprecision(17) << "config " << to_string(cfg.teacher_config) << '\n'
      << "epochs " << tc.epochs << '\n'
      << "test_error " << err << '\n';
  write_file(join_path(dir, "report.txt"), rep.str());
  log << "teacher trained in " << o.seconds << " s\n";
  out << "teacher " << to_string(cfg.teacher_config) << " test error " << fmt(err) << " ("
      << fmt(o.seconds, 4) << " s)\n";
  return 0;
}

void print_sweep(const std::vector<SupernetRun>& runs, std::ostream& out) {
  std::optional<double> ref;
  for (const auto& r : runs) {
    if (std::isinf(r.tau) && r.tau > 0) ref = r.summary.wall_clock_s;
  }
  out << "tau\tquery_ratio\tqueried\tpanel_error\twall_s" << (ref ? "\tvs_standard" : "") << '\n';
  for (const auto& r : runs) {
    out << tau_label(r.tau) << '\t' << fmt(r.summary.query_ratio, 4) << '\t'
        << r.summary.queried_batches << '/' << r.summary.total_batches << '\t'
        << fmt(r.panel_error, 4) << '\t' << fmt(r.summary.wall_clock_s, 4);
    if (ref) out << '\t' << fmt(r.summary.wall_clock_s / *ref, 4) << 'x';
    out << '\n';
  }
}

int cmd_train_supernet(const RunConfig& cfg, bool resume, bool reference,
                       const std::vector<std::string>& sweep, std::ostream& out) {
  const std::string dir = supernet_dir(cfg);
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  if (!sweep.empty()) {
    std::vector<SupernetRun> runs;
    std::ostringstream table;
    table << std::setprecision(17) << "# tau queried total query_ratio panel_error\n";
    for (const auto& t : sweep) {
      const double tau = parse_tau(t);
      runs.push_back(train_supernet_run(cfg, tau, join_path(dir, "tau_" + tau_label(tau)), resume, out));
      const auto& r = runs.back();
      table << tau_label(tau) << ' ' << r.summary.queried_batches << ' ' << r.summary.total_batches
            << ' ' << r.summary.query_ratio << ' ' << r.panel_error << '\n';
    }
    write_file(join_path(dir, "sweep.txt"), table.str());
    print_sweep(runs, out);
    return 0;
  }
  std::optional<double> ref_s;
  if (reference) {
    ref_s = train_supernet_run(cfg, kInf, join_path(dir, "reference"), false, out).summary.wall_clock_s;
  }
  const SupernetRun r = train_supernet_run(cfg, cfg.supernet.kd.tau, dir, resume, out);
  LedgerSummary s = r.summary;
  if (ref_s) {
    s.reference_wall_clock_s = ref_s;
    s.wall_clock_ratio = s.wall_clock_s / *ref_s;
  }
  out << ledger_text(s);
  out << "panel_error " << fmt(r.panel_error) << '\n';
  return 0;
}

FitnessEvaluator make_fitness(const RunConfig& cfg, const Supernet& net, const LabeledSet& val,
                              const CostProfile& profile) {
  const int workers = cfg.workers;
  return FitnessEvaluator(
      net.space(), [&net, &val, workers](const SubnetConfig& c) { return scnas::evaluate(net, c, val, workers); },
      profile, cfg.constraints, cfg.cost_input_len, cfg.duty);
}

int cmd_search(const RunConfig& cfg, const std::string& mode, std::ostream& out) {
  const std::string dir = search_dir(cfg);
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  const Supernet net = load_trained_supernet(cfg);
  const LabeledSet val = search_validation_set(cfg);
  const CostProfile profile = load_cost_profile(cfg);
  FitnessEvaluator fitness = make_fitness(cfg, net, val, profile);
  const auto t0 = std::chrono::steady_clock::now();
  SearchResult result;
  if (mode == "evolutionary") {
    result = evolutionary_search(fitness, cfg.evolution, cfg.search_seed);
  } else if (mode == "exhaustive") {
    result = exhaustive_search(fitness, cfg.exhaustive_cap);
  } else if (mode == "random") {
    result = random_search(fitness, cfg.random_samples, cfg.search_seed);
  } else {
    throw ConfigError("config: search.mode must be evolutionary, exhaustive or random");
  }
  const std::string report = search_report(result, mode);
  write_file(join_path(dir, "report.txt"), report);
  write_file(join_path(dir, "history.txt"), history_text(result.history));
  write_file(join_path(dir, "pareto.csv"), pareto_csv(result.pareto));
  out << report;
  out << "error evaluations " << fitness.error_evaluations() << ", cache hits "
      << fitness.cache_hits() << ", " << fmt(seconds_since(t0), 4) << " s\n";
  return 0;
}

std::string best_from_report(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string key, value;
  while (in >> key >> value) {
    if (key == "best_config") return value;
  }
  throw std::runtime_error(path + ": no best_config entry");
}

int cmd_eval(const RunConfig& cfg, const std::string& subnet, std::ostream& out) {
  const std::string dir = join_path(cfg.output_dir, "eval");
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  const Supernet net = load_trained_supernet(cfg);
  std::string text = subnet.empty() ? cfg.eval_config : subnet;
  const std::string report_path = join_path(search_dir(cfg), "report.txt");
  if (text.empty()) text = best_from_report(report_path);
  EvalReport r;
  r.config = parse_config(text);
  if (!is_member(r.config, cfg.space)) throw std::runtime_error("config " + text + " is not in the search space");
  const LabeledSet data = load_split(cfg.dataset_dir, cfg.eval_split);
  const Supernet standalone = net.extract(r.config);
  r.test_error = evaluate(standalone, standalone.only_config(), data, cfg.workers);
  r.val_error = evaluate(standalone, standalone.only_config(), search_validation_set(cfg), cfg.workers);
  const std::string history_path = join_path(search_dir(cfg), "history.txt");
  if (fs::exists(history_path)) {
    for (const auto& h : parse_history_text(read_file(history_path))) {
      if (h.candidate.config == r.config) {
        r.fitness_error = h.candidate.error;
        break;
      }
    }
  }
  const CostProfile profile = load_cost_profile(cfg);
  FitnessEvaluator fitness(cfg.space, [](const SubnetConfig&) { return 0.0; }, profile,
                           cfg.constraints, cfg.cost_input_len, cfg.duty);
  r.cost = model_cost(profile, r.config, cfg.space, cfg.cost_input_len, cfg.duty);
  r.feasible = fitness.feasible(r.config);
  std::mt19937_64 rng(derive_seed(cfg.baseline_seed, 0xba5e));
  for (int i = 0; i < cfg.random_baselines; ++i) {
    const SubnetConfig c = sample_uniform(cfg.space, rng, [&](const SubnetConfig& x) { return fitness.feasible(x); });
    r.baseline_errors.push_back(evaluate(net, c, data, cfg.workers));
  }
  if (!r.baseline_errors.empty()) {
    double sum = 0;
    for (double e : r.baseline_errors) sum += e;
    r.baseline_mean = sum / static_cast<double>(r.baseline_errors.size());
  }
  const std::string rep = eval_report_text(r);
  write_file(join_path(dir, "report.txt"), rep);
  out << rep;
  return 0;
}

int cmd_cost(const RunConfig& cfg, const std::string& subnet, bool emit_profile, std::ostream& out) {
  const std::string dir = join_path(cfg.output_dir, "cost");
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  const CostProfile profile = load_cost_profile(cfg);
  SubnetConfig config;
  if (subnet.empty() || subnet == "max") config = max_config(cfg.space);
  else if (subnet == "min") config = min_config(cfg.space);
  else config = parse_config(subnet);
  if (!is_member(config, cfg.space)) throw std::runtime_error("config " + subnet + " is not in the search space");
  const CostEstimate c = model_cost(profile, config, cfg.space, cfg.cost_input_len, cfg.duty);
  CostContext ctx{&profile, cfg.cost_input_len, cfg.duty, cfg.constraints.theta};
  std::ostringstream os;
  os << std::setprecision(10) << "config " << to_string(config) << '\n'
     << "latency_ms " << c.latency_ms << '\n'
     << "energy_mj " << c.energy_mj << '\n'
     << "daily_energy_mwh " << c.daily_energy_mwh << '\n'
     << "bottleneck_fraction " << bottleneck_fraction(c) << '\n'
     << "valid " << (validate_config(config, cfg.space, ctx) ? 1 : 0) << '\n';
  write_file(join_path(dir, "report.txt"), os.str());
  out << os.str();
  if (emit_profile) {
    const std::string path = join_path(dir, "reference_profile.csv");
    make_reference_profile(cfg.space, cfg.cost_input_len).save(path);
    out << "reference profile written to " << path << '\n';
  }
  return 0;
}

int cmd_pareto_export(const RunConfig& cfg, std::string input, std::ostream& out) {
  if (input.empty()) input = join_path(search_dir(cfg), "history.txt");
  const std::string dir = join_path(cfg.output_dir, "export");
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  std::vector<Candidate> all;
  for (auto& h : parse_history_text(read_file(input))) all.push_back(std::move(h.candidate));
  const auto front = pareto_front(all);
  const std::string path = join_path(dir, "pareto.csv");
  write_file(path, pareto_csv(front));
  out << front.size() << " of " << all.size() << " candidates on the front; written to " << path << '\n';
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::uint64_t seed, int cases, double tol, std::ostream& out) {
  const std::string dir = join_path(cfg.output_dir, "gradcheck");
  fs::create_directories(dir);
  write_resolved(cfg, dir);
  const auto results = run_gradcheck(seed, cases, tol);
  std::ostringstream os;
  os << "op cases failures max_rel_error\n";
  int failed = 0;
  for (const auto& r : results) {
    os << r.op << ' ' << r.cases << ' ' << r.failures << ' ' << std::setprecision(3) << r.max_rel_error << '\n';
    if (r.failures > 0) ++failed;
  }
  write_file(join_path(dir, "report.txt"), os.str());
  out << os.str();
  if (failed) {
    out << failed << " operator(s) failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

json default_config_json() {
  return {
      {"output_dir", "scnas_out"},
      {"workers", 0},
      {"space", "default"},
      {"dataset",
       {{"dir", ""},
        {"seed", 1},
        {"sample_rate", 16000},
        {"segment_seconds", 5.0},
        {"train_per_class", 1000},
        {"val_per_class", 100},
        {"test_per_class", 300},
        {"train_speakers", 60},
        {"test_speakers", 24},
        {"speaker_dir", ""},
        {"noise_dir", ""}}},
      {"teacher", [] {
         json t = train_defaults(10, 32, 3);
         t["config"] = "max";
         t["checkpoint"] = "";
         return t;
       }()},
      {"supernet", [] {
         json t = train_defaults(10, 32, 3);
         t["init_seed"] = 11;
         t["sampling"] = "single_path";
         t["stabilize_every"] = 0;
         t["tau"] = "inf";
         t["temperature"] = 4.0;
         t["alpha"] = 0.5;
         t["panel_size"] = 8;
         t["panel_seed"] = 99;
         t["panel_split"] = "val";
         return t;
       }()},
      {"cost", {{"profile", ""}, {"input_len", 80000}, {"segment_seconds", 5.0}, {"active_hours", 12.0}}},
      {"constraints", {{"max_latency_ms", 5000.0}, {"max_daily_energy_mwh", 8400.0}, {"theta", 0.35}}},
      {"search",
       {{"mode", "evolutionary"},
        {"population", 64},
        {"generations", 30},
        {"mutation_rate", 0.1},
        {"crossover_rate", 0.5},
        {"tournament", 3},
        {"novelty_retries", 10},
        {"random_samples", 100},
        {"exhaustive_cap", 10000},
        {"val_limit", 0},
        {"seed", 1}}},
      {"eval", {{"config", ""}, {"split", "test"}, {"random_baselines", 10}, {"baseline_seed", 5}}},
  };
}

double parse_tau(const std::string& text) {
  if (text == "inf" || text == "+inf") return kInf;
  if (text == "-inf") return -kInf;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || std::isnan(v)) {
    throw ConfigError("tau '" + text + "' is not a number, inf or -inf");
  }
  return v;
}

std::string tau_label(double tau) {
  if (std::isinf(tau)) return tau > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << tau;
  return os.str();
}

RunConfig resolve_config(const json& user, const std::vector<std::string>& overrides) {
  json j = default_config_json();
  merge(j, user, "");
  for (const auto& o : overrides) merge(j, override_patch(o), "");

  RunConfig c;
  try {
    c.output_dir = get<std::string>(j, "output_dir");
    if (c.output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
    c.workers = get_count(j, "workers", "", 0);
    c.space = space_from_json(j.at("space"));

    const json& d = j.at("dataset");
    c.dataset.seed = get_seed(d, "seed");
    c.dataset.sample_rate = get<int>(d, "sample_rate");
    c.dataset.segment_seconds = get<double>(d, "segment_seconds");
    c.dataset.train_per_class = get<int>(d, "train_per_class");
    c.dataset.val_per_class = get<int>(d, "val_per_class");
    c.dataset.test_per_class = get<int>(d, "test_per_class");
    c.dataset.train_speakers = get<int>(d, "train_speakers");
    c.dataset.test_speakers = get<int>(d, "test_speakers");
    c.dataset.speaker_dir = get<std::string>(d, "speaker_dir");
    c.dataset.noise_dir = get<std::string>(d, "noise_dir");
    c.dataset.workers = c.workers;
    validate_dataset_config(c.dataset);
    c.dataset_dir = get<std::string>(d, "dir");
    if (c.dataset_dir.empty()) c.dataset_dir = join_path(c.output_dir, "data");
    j["dataset"]["dir"] = c.dataset_dir;

    const json& t = j.at("teacher");
    c.teacher = train_from_json(t, "teacher", c.workers);
    const auto tconf = get<std::string>(t, "config");
    c.teacher_config = tconf == "max" ? max_config(c.space) : parse_config(tconf);
    if (!is_member(c.teacher_config, c.space)) throw ConfigError("config: teacher.config is not in the space");
    c.teacher_checkpoint = get<std::string>(t, "checkpoint");
    if (c.teacher_checkpoint.empty()) c.teacher_checkpoint = join_path(c.output_dir, "teacher/model.ckpt");
    j["teacher"]["checkpoint"] = c.teacher_checkpoint;
    validate_train_config(c.teacher);

    const json& s = j.at("supernet");
    c.supernet = train_from_json(s, "supernet", c.workers);
    c.supernet_init_seed = get_seed(s, "init_seed");
    c.supernet.sampling = parse_sampling_mode(get<std::string>(s, "sampling"));
    c.supernet.stabilize_every = get<int>(s, "stabilize_every");
    const json& tau = s.at("tau");
    if (tau.is_number()) c.supernet.kd.tau = tau.get<double>();
    else if (tau.is_string()) c.supernet.kd.tau = parse_tau(tau.get<std::string>());
    else throw ConfigError("config: supernet.tau must be a number, \"inf\" or \"-inf\"");
    c.supernet.kd.temperature = get<double>(s, "temperature");
    c.supernet.kd.alpha = get<double>(s, "alpha");
    c.panel_size = get_count(s, "panel_size", "supernet", 1);
    c.panel_seed = get_seed(s, "panel_seed");
    c.panel_split = get<std::string>(s, "panel_split");
    validate_train_config(c.supernet);

    const json& co = j.at("cost");
    c.cost_profile = get<std::string>(co, "profile");
    c.cost_input_len = static_cast<std::size_t>(get_count(co, "input_len", "cost", 1));
    c.duty.segment_seconds = get<double>(co, "segment_seconds");
    c.duty.active_hours = get<double>(co, "active_hours");
    if (!(c.duty.segment_seconds > 0 && c.duty.active_hours > 0)) {
      throw ConfigError("config: cost.segment_seconds and cost.active_hours must be positive");
    }

    const json& k = j.at("constraints");
    c.constraints.max_latency_ms = get<double>(k, "max_latency_ms");
    c.constraints.max_daily_energy_mwh = get<double>(k, "max_daily_energy_mwh");
    c.constraints.theta = get<double>(k, "theta");
    validate_constraints(c.constraints);

    const json& se = j.at("search");
    c.search_mode = get<std::string>(se, "mode");
    c.evolution.population = get<int>(se, "population");
    c.evolution.generations = get<int>(se, "generations");
    c.evolution.mutation_rate = get<double>(se, "mutation_rate");
    c.evolution.crossover_rate = get<double>(se, "crossover_rate");
    c.evolution.tournament = get<int>(se, "tournament");
    c.evolution.novelty_retries = get<int>(se, "novelty_retries");
    c.evolution.workers = 1;
    validate_evolution_params(c.evolution);
    c.random_samples = get_count(se, "random_samples", "search", 1);
    c.exhaustive_cap = get_seed(se, "exhaustive_cap");
    c.val_limit = get_count(se, "val_limit", "search", 0);
    c.search_seed = get_seed(se, "seed");

    const json& e = j.at("eval");
    c.eval_config = get<std::string>(e, "config");
    c.eval_split = get<std::string>(e, "split");
    c.random_baselines = get_count(e, "random_baselines", "eval", 0);
    c.baseline_seed = get_seed(e, "baseline_seed");
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.json = std::move(j);
  return c;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path);
    user = json::parse(f, nullptr, false, true);
    if (user.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
  }
  return resolve_config(user, overrides);
}

CostProfile load_cost_profile(const RunConfig& cfg) {
  if (cfg.cost_profile.empty()) return make_reference_profile(cfg.space, cfg.cost_input_len);
  return CostProfile::load(cfg.cost_profile);
}

LabeledSet search_validation_set(const RunConfig& cfg) {
  LabeledSet val = load_split(cfg.dataset_dir, "val");
  if (cfg.val_limit > 0 && val.size() > static_cast<std::size_t>(cfg.val_limit)) {
    val.inputs.resize(static_cast<std::size_t>(cfg.val_limit));
    val.labels.resize(static_cast<std::size_t>(cfg.val_limit));
  }
  return val;
}

SupernetRun train_supernet_run(const RunConfig& cfg, double tau, const std::string& dir,
                               bool resume, std::ostream& out) {
  fs::create_directories(dir);
  TrainConfig tc = cfg.supernet;
  tc.kd.tau = tau;
  validate_train_config(tc);
  const LabeledSet train = load_split(cfg.dataset_dir, "train");

  std::optional<Supernet> teacher_net;
  std::unique_ptr<NetworkTeacher> teacher;
  if (!(std::isinf(tau) && tau > 0)) {
    teacher_net.emplace(load_supernet(cfg.teacher_checkpoint));
    if (teacher_net->space().num_classes != cfg.space.num_classes) {
      throw std::runtime_error("teacher checkpoint has a different class count");
    }
    teacher = std::make_unique<NetworkTeacher>(*teacher_net, teacher_net->only_config(), cfg.workers);
  }

  json run = cfg.json;
  run["supernet"]["tau"] = tau_label(tau);
  auto net = std::make_unique<Supernet>(cfg.space, cfg.supernet_init_seed);
  const std::string ckpt = join_path(dir, "model.ckpt");
  const bool resuming = resume && fs::exists(ckpt);
  std::ofstream log(join_path(dir, "train.log"), resuming ? std::ios::app : std::ios::trunc);
  const auto o = train_checkpointed(net, tc, teacher.get(), train, ckpt, run.dump(), resume, log);

  SupernetRun r;
  r.tau = tau;
  r.dir = dir;
  r.summary = append_history(join_path(dir, "history.tsv"), o.history, o.resumed);
  r.summary.wall_clock_s = o.ledger.wall_clock_s;
  r.summary.gated_step_s = o.ledger.gated_step_s;
  r.summary.standard_step_s = o.ledger.standard_step_s;
  write_file(join_path(dir, "ledger.txt"), ledger_counts_text(r.summary));

  const auto panel = evaluation_panel(cfg.space, cfg.panel_size, cfg.panel_seed);
  const LabeledSet eval_data = cfg.panel_split == "val" ? search_validation_set(cfg)
                                                        : load_split(cfg.dataset_dir, cfg.panel_split);
  r.panel_error = panel_error(*net, panel, eval_data, cfg.workers);
  std::ostringstream rep;
  rep << std::setprecision(17) << "tau " << tau_label(tau) << '\n'
      << "queried " << r.summary.queried_batches << '\n'
      << "total " << r.summary.total_batches << '\n'
      << "query_ratio " << r.summary.query_ratio << '\n'
      << "panel_split " << cfg.panel_split << '\n'
      << "panel_error " << r.panel_error << '\n';
  for (const auto& c : panel) rep << "panel " << to_string(c) << '\n';
  write_file(join_path(dir, "report.txt"), rep.str());
  log << "wall_clock_s " << r.summary.wall_clock_s << '\n';
  out << "tau " << tau_label(tau) << ": queried " << r.summary.queried_batches << '/'
      << r.summary.total_batches << ", panel error " << fmt(r.panel_error, 4) << ", "
      << fmt(o.seconds, 4) << " s\n";
  return r;
}

std::string eval_report_text(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "config " << to_string(r.config) << '\n'
     << "test_error " << r.test_error << '\n'
     << "val_error " << r.val_error << '\n';
  if (r.fitness_error) os << "fitness_error " << *r.fitness_error << '\n';
  os << "latency_ms " << r.cost.latency_ms << '\n'
     << "daily_energy_mwh " << r.cost.daily_energy_mwh << '\n'
     << "feasible " << (r.feasible ? 1 : 0) << '\n'
     << "baseline_count " << r.baseline_errors.size() << '\n'
     << "baseline_mean_error " << r.baseline_mean << '\n';
  for (double e : r.baseline_errors) os << "baseline_error " << e << '\n';
  return os.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hardware-aware architecture search for speaker-count classification", "scnas"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON run config (defaults apply to missing keys)");
  app.add_option("--set", overrides, "Override one key, e.g. --set supernet.tau=4.5");

  auto* synth = app.add_subcommand("synth-data", "Generate the labeled mixture dataset");
  auto* teacher = app.add_subcommand("train-teacher", "Train the fixed-architecture teacher");
  bool teacher_resume = false;
  teacher->add_flag("--resume", teacher_resume, "Continue from the checkpoint in the output directory");

  auto* supernet = app.add_subcommand("train-supernet", "Train the weight-sharing supernet");
  bool sn_resume = false, sn_reference = false;
  std::vector<std::string> sweep;
  supernet->add_flag("--resume", sn_resume, "Continue from the checkpoint in the output directory");
  supernet->add_flag("--reference", sn_reference, "Also train a tau=+inf run and report the wall-clock ratio");
  supernet->add_option("--tau-sweep", sweep, "Train once per tau and tabulate the results")->delimiter(',');

  auto* search = app.add_subcommand("search", "Search the trained supernet under the cost budget");
  auto* mode = search->add_option_group("mode");
  bool exhaustive = false, evolutionary = false, random = false;
  mode->add_flag("--exhaustive", exhaustive, "Score every valid config");
  mode->add_flag("--evolutionary", evolutionary, "Evolutionary search");
  mode->add_flag("--random", random, "Random feasible sampling");
  mode->require_option(0, 1);

  auto* eval = app.add_subcommand("eval", "Evaluate an extracted subnet on held-out data");
  std::string eval_subnet;
  eval->add_option("--subnet", eval_subnet, "Config as c:r:k/...; defaults to the searched best");

  auto* cost = app.add_subcommand("cost", "Estimated latency and energy of a config");
  std::string cost_subnet;
  bool emit_profile = false;
  cost->add_option("--subnet", cost_subnet, "Config as c:r:k/..., or min / max (default)");
  cost->add_flag("--emit-profile", emit_profile, "Also write the reference device profile");

  auto* pareto = app.add_subcommand("pareto-export", "Write the Pareto CSV of a search history");
  std::string pareto_input;
  pareto->add_option("--history", pareto_input, "History file; defaults to the last search");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every operator");
  std::uint64_t gc_seed = 1;
  int gc_cases = 20;
  double gc_tol = 1e-4;
  grad->add_option("--seed", gc_seed);
  grad->add_option("--cases", gc_cases)->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", gc_tol)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const RunConfig cfg = load_run_config(config_path, overrides);
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (teacher->parsed()) return cmd_train_teacher(cfg, teacher_resume, out);
    if (supernet->parsed()) return cmd_train_supernet(cfg, sn_resume, sn_reference, sweep, out);
    if (search->parsed()) {
      std::string m = cfg.search_mode;
      if (exhaustive) m = "exhaustive";
      if (evolutionary) m = "evolutionary";
      if (random) m = "random";
      return cmd_search(cfg, m, out);
    }
    if (eval->parsed()) return cmd_eval(cfg, eval_subnet, out);
    if (cost->parsed()) return cmd_cost(cfg, cost_subnet, emit_profile, out);
    if (pareto->parsed()) return cmd_pareto_export(cfg, pareto_input, out);
    if (grad->parsed()) return cmd_gradcheck(cfg, gc_seed, gc_cases, gc_tol, out);
  } catch (const std::exception& e) {
    err << "scnas: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("scnas");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace scnas
