#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "symts/error.hpp"
#include "symts/metrics.hpp"
#include "symts/pipeline.hpp"

namespace symts {
namespace {

using testing::make_series;

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

ExperimentConfig random_cfg(std::size_t iterations) {
  ExperimentConfig cfg;
  cfg.search.mode = SearchMode::NoPvn;
  cfg.search.iterations_per_episode = iterations;
  return cfg;
}

TEST(Windows, Counts) {
  const TimeSeries s = make_series(10, [](double t) { return t; });
  EXPECT_EQ(sliding_windows(s, 5, 5).size(), 2u);
  const auto w = sliding_windows(s, 5, 1);
  ASSERT_EQ(w.size(), 6u);
  EXPECT_EQ(w[3].timestamps()[0], 0.0);
  EXPECT_EQ(w[3].values()[0], 3.0);
  EXPECT_EQ(kind_of([] { sliding_windows(make_series(4, [](double t) { return t; }), 5, 1); }),
            ErrorKind::InsufficientData);
}

TEST(Windows, Split) {
  std::vector<TimeSeries> w;
  for (int i = 0; i < 100; ++i) w.push_back(make_series(4, [i](double t) { return t + i; }));
  const WindowSplit s = split_windows(w, 0.1);
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_EQ(s.test.size(), 90u);
  EXPECT_EQ(s.train[0].values()[0], 0.0);
  EXPECT_EQ(s.test[0].values()[0], 10.0);
  EXPECT_EQ(kind_of([&] { split_windows(w, 1.0); }), ErrorKind::Configuration);
}

TEST(DefaultIterations, ByWindowLength) {
  EXPECT_EQ(default_iterations(36), 200u);
  EXPECT_EQ(default_iterations(72), 300u);
}

TEST(TrainingData, OneWindowTenIterations) {
  const std::vector<TimeSeries> w{make_series(36, [](double t) { return std::sin(t); })};
  ExperimentConfig cfg;
  cfg.training_iterations = 10;
  const TrainingData d = generate_training_data(w, FunctionLibrary(), cfg, nullptr, 1);
  EXPECT_GE(d.examples.size(), 10u);
  for (const auto& ex : d.examples) {
    EXPECT_NEAR(std::accumulate(ex.target_policy.begin(), ex.target_policy.end(), 0.0), 1.0,
                1e-9);
  }
}

TEST(TrainingData, PlantedSeriesRecordsRepeatedPattern) {
  const std::vector<TimeSeries> w{
      make_series(36, [](double t) { return std::sin(t) + 0.5 * t; })};
  ExperimentConfig cfg;
  cfg.training_iterations = 300;
  cfg.episodes_per_window = 3;
  // Random rollouts on raw values rarely clear 0.5, so count trend-only backbones.
  cfg.sas.reward_threshold = 0.02;
  std::uint64_t best = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const TrainingData d = generate_training_data(w, FunctionLibrary(), cfg, nullptr, seed);
    best = 0;
    for (const auto& [k, s] : d.recorder.stats()) best = std::max(best, s.count);
    EXPECT_GE(best, 2u) << "seed " << seed;
  }
}

TEST(Train, HeldOutValueErrorHalves) {
  std::vector<TimeSeries> train_w, held_w;
  for (int i = 0; i < 8; ++i) {
    auto f = [i](double t) { return std::sin(0.3 * t + i) + 0.05 * i * t; };
    (i % 2 ? held_w : train_w).push_back(make_series(36, f));
  }
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.training_iterations = 60;
  cfg.train.learning_rate = 0.05;
  cfg.train.epochs = 20;
  cfg.training_rounds = 1;
  const TrainResult r = train_on_windows(train_w, cfg);
  const TrainingData held = generate_training_data(held_w, FunctionLibrary(), cfg, nullptr, 77);
  ASSERT_FALSE(held.examples.empty());

  const PolicyValueNet untrained(r.net.config(), derive_seed(cfg.seed, 0));
  auto mse = [&](const PolicyValueNet& net) {
    double s = 0.0;
    for (const auto& ex : held.examples) {
      s += loss_value(net.forward(ex.path_tokens, ex.series_window).value, ex.target_reward);
    }
    return s / static_cast<double>(held.examples.size());
  };
  EXPECT_LE(mse(r.net), 0.5 * mse(untrained));
  EXPECT_LE(r.library.augmented_entries().size(), cfg.sas.k);
  ASSERT_EQ(r.history.size(), 1u);
}

TEST(Train, DatasetSplit) {
  const TimeSeries data = make_series(36 * 20, [](double t) { return std::sin(0.1 * t); });
  ExperimentConfig cfg;
  cfg.training_iterations = 5;
  cfg.training_rounds = 1;
  const TrainResult r = train(data, cfg);
  EXPECT_EQ(r.train_windows, 2u);
  EXPECT_EQ(r.test_windows, 18u);
}

TEST(FitSeries, RecoversLinear) {
  const TimeSeries s = make_series(36, [](double t) { return 2 * t + 1; });
  const FitResult f = fit_series(s, nullptr, FunctionLibrary(), random_cfg(200), 1);
  ASSERT_TRUE(f.r2_defined);
  EXPECT_GE(f.r2, 0.99);
  EXPECT_GE(f.reward, 0.0);
  EXPECT_LE(f.reward, 1.0);
  // The reported text parses back to the backbone.
  EXPECT_EQ(testing::parse_infix(f.expression_text), f.backbone);
}

TEST(FitSeries, ConstantSeriesIsPerfectFit) {
  const TimeSeries s = make_series(36, [](double) { return 5.0; });
  const FitResult f = fit_series(s, nullptr, FunctionLibrary(), random_cfg(100), 2);
  const auto pred = f.predict_at(s.timestamps());
  for (double p : pred) EXPECT_NEAR(p, 5.0, 1e-6);
  EXPECT_TRUE(f.r2_defined);
  EXPECT_EQ(f.r2, 1.0);
}

TEST(FitSeries, Deterministic) {
  const TimeSeries s = make_series(36, [](double t) { return std::sin(t) + 0.3 * t; });
  const ExperimentConfig cfg = random_cfg(100);
  const FitResult a = fit_series(s, nullptr, FunctionLibrary(), cfg, 9);
  const FitResult b = fit_series(s, nullptr, FunctionLibrary(), cfg, 9);
  EXPECT_EQ(a.backbone, b.backbone);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.expression_text, b.expression_text);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(a.counter.simulation_steps, b.counter.simulation_steps);
}

TEST(FitSeries, NormalizedValuesMapBack) {
  const TimeSeries s = make_series(36, [](double t) { return 500.0 + 40.0 * t; });
  ExperimentConfig cfg = random_cfg(200);
  cfg.normalize = true;
  int good = 0;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const FitResult f = fit_series(s, nullptr, FunctionLibrary(), cfg, seed);
    EXPECT_DOUBLE_EQ(f.value_offset, 1200.0);
    EXPECT_GT(f.value_scale, 1.0);
    // Metrics are on the raw scale.
    const auto pred = f.predict_at(s.timestamps());
    EXPECT_NEAR(f.r2, r_squared(pred, s.values()), 1e-12);
    good += f.r2 >= 0.99;
  }
  EXPECT_GE(good, 3);
}

TEST(Evaluate, MeansAndAtc) {
  std::vector<TimeSeries> w;
  for (int i = 0; i < 3; ++i) w.push_back(make_series(20, [i](double t) { return (i + 1) * t; }));
  ExperimentConfig cfg = random_cfg(40);
  const EvaluationReport r = evaluate_windows(w, nullptr, FunctionLibrary(), cfg);
  ASSERT_EQ(r.rows.size(), 3u);
  double sum = 0.0, elapsed = 0.0;
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.fit.r2_defined);
    sum += row.fit.r2;
    elapsed += row.fit.elapsed_seconds;
  }
  EXPECT_NEAR(r.mean_r2, sum / 3.0, 1e-12);
  EXPECT_NEAR(r.atc, elapsed / 3.0, 1e-12);

  cfg.workers = 3;
  const EvaluationReport p = evaluate_windows(w, nullptr, FunctionLibrary(), cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.rows[i].fit.expression_text, r.rows[i].fit.expression_text);
  }
}

TEST(Evaluate, RequiresNetworkForFullMode) {
  std::vector<TimeSeries> w{make_series(20, [](double t) { return t; })};
  ExperimentConfig cfg;
  EXPECT_EQ(kind_of([&] { evaluate_windows(w, nullptr, FunctionLibrary(), cfg); }),
            ErrorKind::Configuration);
}

TEST(Extrapolate, LinearHorizon) {
  const TimeSeries s = make_series(36, [](double t) { return 0.5 * t; });
  const ExtrapolationResult x = extrapolate(s, nullptr, FunctionLibrary(), random_cfg(200), 1);
  EXPECT_EQ(x.predictions.size(), 6u);
  EXPECT_EQ(x.timestamps.front(), 30.0);
  ASSERT_TRUE(x.r2_defined);
  EXPECT_GE(x.r2, 0.99);
}

TEST(Extrapolate, ShortSeries) {
  const TimeSeries s = make_series(20, [](double t) { return t; });
  EXPECT_EQ(kind_of([&] { extrapolate(s, nullptr, FunctionLibrary(), random_cfg(10), 1); }),
            ErrorKind::InsufficientData);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig cfg;
  cfg.train_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.search.max_path_length = 2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.workers = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace symts
