// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "scnas/cli.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scnas {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) ADD_FAILURE() << "missing " << p;
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// 16-member space small enough to search exhaustively in a test.
json tiny_config(const fs::path& out) {
  json j;
  j["output_dir"] = out.string();
  j["workers"] = 1;
  j["space"] = {{"input_channels", 1},
                {"num_classes", 6},
                {"stages",
                 {{{"channels", {4, 6}}, {"repeats", {1}}, {"kernels", {3, 5}}, {"stride", 2}},
                  {{"channels", {4, 6}}, {"repeats", {1}}, {"kernels", {3, 5}}, {"stride", 1}}}}};
  j["dataset"] = {{"sample_rate", 8000}, {"segment_seconds", 0.05}, {"train_per_class", 3},
                  {"val_per_class", 2},  {"test_per_class", 2},     {"train_speakers", 8},
                  {"test_speakers", 7}};
  j["teacher"] = {{"epochs", 1}, {"batch_size", 6}};
  j["supernet"] = {{"epochs", 1}, {"batch_size", 6}, {"tau", 2.5}, {"panel_size", 3}};
  j["cost"] = {{"input_len", 400}};
  j["constraints"] = {{"theta", 1.0}};
  j["search"] = {{"population", 8}, {"generations", 6}};
  j["eval"] = {{"random_baselines", 3}};
  return j;
}

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("scnas_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(config()) << tiny_config(root_ / "run").dump(2);
    for (const auto& cmd : {"synth-data", "train-teacher", "train-supernet"}) {
      const auto r = cli({"-c", config(), cmd});
      ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    }
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static std::string config() { return (root_ / "config.json").string(); }
  static fs::path run() { return root_ / "run"; }
  static fs::path root_;
};
fs::path Pipeline::root_;

TEST_F(Pipeline, ArtifactsAndResolvedConfig) {
  for (const auto* f : {"data/train.tsv", "data/val.tsv", "data/test.tsv", "data/config.json",
                        "teacher/model.ckpt", "teacher/report.txt", "supernet/model.ckpt",
                        "supernet/ledger.txt", "supernet/history.tsv", "supernet/report.txt",
                        "supernet/config.json"}) {
    EXPECT_TRUE(fs::exists(run() / f)) << f;
  }
  const auto resolved = json::parse(slurp(run() / "supernet/config.json"));
  EXPECT_EQ(resolved["dataset"]["dir"], (run() / "data").string());
  EXPECT_EQ(resolved["search"]["mode"], "evolutionary");
  EXPECT_EQ(resolved["supernet"]["sampling"], "single_path");
  const auto ledger = slurp(run() / "supernet/ledger.txt");
  EXPECT_NE(ledger.find("total_batches 3"), std::string::npos) << ledger;
}

TEST_F(Pipeline, ExhaustiveAndEvolutionaryAgree) {
  auto ex = cli({"-c", config(), "search", "--exhaustive"});
  ASSERT_EQ(ex.code, 0) << ex.err;
  const auto ex_report = slurp(run() / "search/report.txt");
  auto evo = cli({"-c", config(), "search", "--evolutionary"});
  ASSERT_EQ(evo.code, 0) << evo.err;
  const auto evo_report = slurp(run() / "search/report.txt");
  auto line = [](const std::string& text, const std::string& key) {
    const auto p = text.find(key + ' ');
    return text.substr(p, text.find('\n', p) - p);
  };
  EXPECT_EQ(line(ex_report, "best_config"), line(evo_report, "best_config"));
  EXPECT_EQ(line(ex_report, "error"), line(evo_report, "error"));
  EXPECT_NE(ex_report.find("evaluated 16"), std::string::npos) << ex_report;
}

TEST_F(Pipeline, SearchIsIdempotent) {
  ASSERT_EQ(cli({"-c", config(), "search"}).code, 0);
  const auto a = slurp(run() / "search/history.txt");
  const auto pa = slurp(run() / "search/pareto.csv");
  ASSERT_EQ(cli({"-c", config(), "search"}).code, 0);
  EXPECT_EQ(slurp(run() / "search/history.txt"), a);
  EXPECT_EQ(slurp(run() / "search/pareto.csv"), pa);
}

TEST_F(Pipeline, EvalMatchesTheSearchFitness) {
  ASSERT_EQ(cli({"-c", config(), "search"}).code, 0);
  const auto r = cli({"-c", config(), "eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = slurp(run() / "eval/report.txt");
  auto value = [&](const std::string& key) {
    const auto p = rep.find(key + ' ');
    EXPECT_NE(p, std::string::npos) << key << " in " << rep;
    return std::stod(rep.substr(p + key.size() + 1));
  };
  EXPECT_EQ(value("val_error"), value("fitness_error"));
  const double test_error = value("test_error");
  EXPECT_GE(test_error, 0.0);
  EXPECT_LE(test_error, 1.0);
  EXPECT_NE(rep.find("baseline_mean"), std::string::npos);
}

TEST_F(Pipeline, EvalOfNamedSubnet) {
  const auto r = cli({"-c", config(), "eval", "--subnet", "6:1:5/6:1:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(run() / "eval/report.txt").find("config 6:1:5/6:1:5"), std::string::npos);
  EXPECT_NE(cli({"-c", config(), "eval", "--subnet", "9:1:5/6:1:5"}).code, 0);
}

TEST_F(Pipeline, ParetoExport) {
  ASSERT_EQ(cli({"-c", config(), "search", "--exhaustive"}).code, 0);
  ASSERT_EQ(cli({"-c", config(), "pareto-export"}).code, 0);
  EXPECT_EQ(slurp(run() / "export/pareto.csv"), slurp(run() / "search/pareto.csv"));
}

TEST_F(Pipeline, ResumeMatchesAStraightRun) {
  const auto a = root_ / "straight", b = root_ / "resumed";
  for (const auto& d : {a, b}) {
    fs::create_directories(d);
    fs::copy(run() / "data", d / "data", fs::copy_options::recursive);
    fs::copy(run() / "teacher", d / "teacher", fs::copy_options::recursive);
  }
  auto set_dir = [](const fs::path& d) {
    return std::vector<std::string>{"--set", "output_dir=" + d.string(), "--set",
                                    "dataset.dir=" + (d / "data").string(), "--set",
                                    "teacher.checkpoint=" + (d / "teacher/model.ckpt").string()};
  };
  auto args = [&](const fs::path& d, int epochs, bool resume) {
    std::vector<std::string> v{"-c", config()};
    for (auto& s : set_dir(d)) v.push_back(s);
    v.insert(v.end(), {"--set", "supernet.epochs=" + std::to_string(epochs), "train-supernet"});
    if (resume) v.push_back("--resume");
    return v;
  };
  ASSERT_EQ(cli(args(a, 2, false)).code, 0);
  ASSERT_EQ(cli(args(b, 1, false)).code, 0);
  const auto r = cli(args(b, 2, true));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ma = restore_model(load_checkpoint((a / "supernet/model.ckpt").string()));
  const auto mb = restore_model(load_checkpoint((b / "supernet/model.ckpt").string()));
  EXPECT_EQ(ma.progress.steps_done, mb.progress.steps_done);
  for (std::size_t i = 0; i < ma.net.params().size(); ++i) {
    EXPECT_EQ(ma.net.params().value(i), mb.net.params().value(i)) << ma.net.params().name(i);
  }
  EXPECT_EQ(slurp(a / "supernet/history.tsv"), slurp(b / "supernet/history.tsv"));
  EXPECT_EQ(slurp(a / "supernet/ledger.txt"), slurp(b / "supernet/ledger.txt"));
}

TEST_F(Pipeline, TauSweepBrackets) {
  const auto r = cli({"-c", config(), "train-supernet", "--tau-sweep", "inf,2.5,-inf"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sweep = slurp(run() / "supernet/sweep.txt");
  EXPECT_NE(sweep.find("\ninf 0 3 0 "), std::string::npos) << sweep;
  EXPECT_NE(sweep.find("\n-inf 3 3 1 "), std::string::npos) << sweep;
  EXPECT_NE(r.out.find("vs_standard"), std::string::npos);
}

TEST(Cli, ConfigValidation) {
  EXPECT_THROW(resolve_config(json{{"dataset", {{"bogus", 1}}}}), ConfigError);
  EXPECT_THROW(resolve_config(json{{"nonsense", 1}}), ConfigError);
  EXPECT_THROW(resolve_config(json{{"teacher", {{"epochs", "ten"}}}}), ConfigError);
  EXPECT_THROW(resolve_config(json::object(), {"search.bogus=3"}), ConfigError);
  const auto c = resolve_config(json::object(), {"supernet.tau=4.5", "search.population=12",
                                                 "output_dir=/tmp/somewhere"});
  EXPECT_EQ(c.supernet.kd.tau, 4.5);
  EXPECT_EQ(c.evolution.population, 12);
  EXPECT_EQ(c.dataset_dir, "/tmp/somewhere/data");
  EXPECT_EQ(resolve_config(json::object(), {"supernet.tau=-inf"}).supernet.kd.tau,
            -std::numeric_limits<double>::infinity());
  EXPECT_EQ(space_cardinality(resolve_config(json::object()).space), 387420489u);
}

TEST(Cli, TauParsing) {
  EXPECT_EQ(parse_tau("5"), 5.0);
  EXPECT_TRUE(std::isinf(parse_tau("+inf")));
  EXPECT_ANY_THROW(parse_tau("five"));
  EXPECT_EQ(tau_label(parse_tau("-inf")), "-inf");
}

TEST(Cli, ErrorsAreReportedNotThrown) {
  auto r = cli({"--set", "nonsense=1", "cost"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("scnas: error"), std::string::npos) << r.err;
  r = cli({"no-such-command"});
  EXPECT_NE(r.code, 0);
  r = cli({"-c", "/nonexistent/config.json", "cost"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, SynthIntoBlockedDirectoryFails) {
  const auto base = fs::temp_directory_path() / ("scnas_cli_blocked_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);
  std::ofstream(base / "data") << "file, not a directory";
  std::ofstream(base / "config.json") << tiny_config(base).dump();
  const auto r = cli({"-c", (base / "config.json").string(), "synth-data"});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(base / "data" / "train.tsv"));
  fs::remove_all(base);
}

TEST(Cli, CostCommand) {
  const auto base = fs::temp_directory_path() / ("scnas_cli_cost_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const auto r = cli({"--set", "output_dir=" + base.string(), "cost", "--subnet", "min"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("latency_ms"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("daily_energy_mwh"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(base / "cost/report.txt"));
  ASSERT_EQ(cli({"--set", "output_dir=" + base.string(), "cost", "--emit-profile"}).code, 0);
  const auto profile = CostProfile::load((base / "cost/reference_profile.csv").string());
  EXPECT_GT(profile.rows().size(), 100u);
  fs::remove_all(base);
}

TEST(Cli, Gradcheck) {
  const auto base = fs::temp_directory_path() / ("scnas_cli_gc_" + std::to_string(::getpid()));
  const auto r = cli({"--set", "output_dir=" + base.string(), "gradcheck", "--cases", "3"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  fs::remove_all(base);
}

}  // namespace
}  // namespace scnas
