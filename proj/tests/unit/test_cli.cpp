#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "symts/error.hpp"
#include "symts/pvnet.hpp"
#include "symts_cli.hpp"

namespace symts {
namespace {

namespace fs = std::filesystem;

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no symts::Error thrown";
  return ErrorKind::Contract;
}

fs::path scratch(std::string_view name) {
  const fs::path p = fs::temp_directory_path() / "symts_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int invoke(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "symts");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

fs::path write_series(const fs::path& dir, const TimeSeries& s) {
  const fs::path f = dir / "series.csv";
  std::ofstream out(f, std::ios::binary);
  cli::write_csv(s, out);
  return f;
}

TEST(Csv, Examples) {
  const TimeSeries s = cli::parse_csv("0,1.5\n1,2.5");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.values()[1], 2.5);
  try {
    cli::parse_csv("1,a\n2,3");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos);
  }
  EXPECT_EQ(kind_of([] { cli::parse_csv("0,1\n0,2"); }), ErrorKind::Ordering);
}

TEST(Csv, HeaderAndRoundTrip) {
  const TimeSeries s = cli::parse_csv("\xEF\xBB\xBFt,value\n1,0.25\n2,0.5\n");
  ASSERT_EQ(s.size(), 2u);
  std::ostringstream out;
  cli::write_csv(s, out);
  EXPECT_EQ(out.str(), "t,value\n1,0.25\n2,0.5\n");
  EXPECT_EQ(kind_of([] { cli::ingest_csv("/nonexistent/series.csv"); }), ErrorKind::Io);
}

TEST(Synth, Generators) {
  const TimeSeries lin = cli::synth("linear", 10, 0.0, 1);
  ASSERT_EQ(lin.size(), 10u);
  for (std::size_t i = 0; i < lin.size(); ++i) EXPECT_EQ(lin.values()[i], lin.timestamps()[i]);

  const TimeSeries a = cli::synth("sine", 30, 0.2, 5);
  const TimeSeries b = cli::synth("sine", 30, 0.2, 5);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));

  const double expect =
      0.0974 * std::pow(std::log(1.6042), 2.65) + 0.9 * std::cos(std::pow(0.11, 1.66));
  EXPECT_NEAR(cli::composite(1.0), expect, 1e-15);
  EXPECT_NEAR(cli::synth("composite", 3, 0.0, 0).values()[0], expect, 1e-15);
  EXPECT_EQ(kind_of([] { cli::synth("nope", 10, 0.0, 0); }), ErrorKind::Configuration);
}

TEST(Args, Precedence) {
  const fs::path dir = scratch("precedence");
  const fs::path conf = dir / "run.conf";
  {
    std::ofstream c(conf);
    c << "# settings\nseed = 4\nwindow = 72\nsearch.c = 2.5\ntrain.learning_rate = 0.01\n";
  }
  std::vector<std::string> args{"symts", "fit", "--config", conf.string(), "--set", "seed=5",
                                "--set", "search.c=3", "--seed", "6"};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  const auto cfg = cli::parse_args(static_cast<int>(argv.size()), argv.data(), out);
  ASSERT_TRUE(cfg);
  EXPECT_EQ(cfg->seed, 6u);
  EXPECT_EQ(cfg->window, 72u);
  EXPECT_EQ(cfg->experiment.search.c, 3.0);
  EXPECT_EQ(cfg->experiment.train.learning_rate, 0.01);
  EXPECT_EQ(cli::resolve_experiment(*cfg).search.iterations_per_episode, 300u);
}

TEST(Args, UnknownSetting) {
  cli::RunConfig cfg;
  EXPECT_EQ(kind_of([&] { cli::apply_setting(cfg, "search.bogus", "1"); }),
            ErrorKind::Configuration);
  EXPECT_EQ(kind_of([&] { cli::apply_setting(cfg, "seed", "abc"); }), ErrorKind::Configuration);
  cli::apply_setting(cfg, "experiment.normalize", "true");
  EXPECT_TRUE(cfg.experiment.normalize);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Configuration), cli::ExitCode::Usage);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Parse), cli::ExitCode::Data);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::TrainingDivergence), cli::ExitCode::Runtime);
  EXPECT_EQ(invoke({"fit", "--bogus"}), 1);
}

TEST(Run, FitIsByteIdentical) {
  const fs::path dir = scratch("fit_twice");
  const fs::path csv = write_series(dir, cli::synth("linear", 36, 0.0, 7));
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(invoke({"fit", "--input", csv.string(), "--mode", "no_pvn", "--seed", "7",
                      "--iterations", "80", "--out", (dir / sub).string()}),
              0);
  }
  const std::string a = slurp(dir / "a" / "fit.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "fit.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "a" / "timing.jsonl"));
}

TEST(Run, FullModeWithoutWeightsFailsFast) {
  const fs::path dir = scratch("no_weights");
  const fs::path csv = write_series(dir, cli::synth("linear", 80, 0.0, 1));
  std::string err;
  EXPECT_EQ(invoke({"evaluate", "--input", csv.string(), "--mode", "full", "--out",
                    dir.string()},
                   &err),
            1);
  EXPECT_NE(err.find("configuration"), std::string::npos) << err;
}

TEST(Run, NoPvnIgnoresMissingModel) {
  const fs::path dir = scratch("no_pvn_model");
  const fs::path csv = write_series(dir, cli::synth("sine", 36, 0.0, 1));
  EXPECT_EQ(invoke({"fit", "--input", csv.string(), "--mode", "no_pvn", "--model",
                    (dir / "missing.bin").string(), "--iterations", "20", "--out",
                    dir.string()}),
            0);
}

TEST(Run, BenchCountsMoreStepsWithoutValueHead) {
  const fs::path dir = scratch("bench");
  const fs::path csv = write_series(dir, cli::synth("sine-plus-trend", 72, 0.0, 2));
  const fs::path model = dir / "model.bin";
  save_weights(PolicyValueNet(NetConfig{}, 3), model);
  ASSERT_EQ(invoke({"bench", "--input", csv.string(), "--model", model.string(), "--iterations",
                    "40", "--bench-windows", "2", "--out", dir.string()}),
            0);
  std::ifstream in(dir / "bench.jsonl");
  std::string line;
  double ratio = 0.0;
  while (std::getline(in, line)) {
    const auto at = line.find("\"step_ratio\":");
    if (at != std::string::npos) ratio = std::stod(line.substr(at + 13));
  }
  EXPECT_GT(ratio, 1.0);
}

TEST(Run, TrainWritesArtifacts) {
  const fs::path dir = scratch("train");
  const fs::path csv = write_series(dir, cli::synth("sine", 36 * 10, 0.0, 2));
  ASSERT_EQ(invoke({"train", "--input", csv.string(), "--seed", "1", "--set",
                    "train.rounds=1", "--set", "train.iterations=10", "--out", dir.string()}),
            0);
  EXPECT_NO_THROW(load_weights(dir / "model.bin"));
  EXPECT_NO_THROW(FunctionLibrary::load(dir / "library.txt"));
  EXPECT_TRUE(fs::exists(dir / "train.jsonl"));
}

}  // namespace
}  // namespace symts
