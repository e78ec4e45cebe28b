#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "symts/expr.hpp"
#include "symts/library.hpp"
#include "symts/mcts.hpp"
#include "symts/optimizer.hpp"
#include "symts/pvnet.hpp"
#include "symts/time_series.hpp"

namespace symts {

/// Episode budget for a window length: 200 below 72 points, 300 from 72 up.
std::size_t default_iterations(std::size_t window_length) noexcept;

struct ExperimentConfig {
  std::size_t window_length = 36;
  /// 0 means non-overlapping windows (stride = window_length).
  std::size_t stride = 0;
  double train_fraction = 0.10;
  std::size_t fit_length = 30;
  std::size_t horizon = 6;
  std::uint64_t seed = 0;

  SearchConfig search;
  /// Final coefficient fit on the extracted backbone.
  OptimizerConfig optimizer;
  NetConfig net;
  TrainConfig train;
  RecorderConfig sas;

  /// Alternations of data generation and network epochs.
  std::size_t training_rounds = 2;
  std::size_t episodes_per_window = 1;
  /// Iterations per data-generation episode.
  std::size_t training_iterations = 100;
  /// Record rollouts and mine augmented patterns during training.
  bool use_sas = true;
  /// Search and fit on standardized values; predictions are mapped back.
  bool normalize = false;
  std::size_t workers = 1;

  void validate() const;
  std::size_t effective_stride() const noexcept { return stride ? stride : window_length; }
};

/// Windows at offsets 0, stride, 2 stride, ..., each re-indexed from t = 0.
std::vector<TimeSeries> sliding_windows(const TimeSeries& series, std::size_t length,
                                        std::size_t stride);

struct WindowSplit {
  std::vector<TimeSeries> train;
  std::vector<TimeSeries> test;
};

/// Earliest floor(fraction * n) windows (at least one) train, the rest test.
WindowSplit split_windows(std::vector<TimeSeries> windows, double train_fraction);

struct TrainingData {
  std::vector<TrainingExample> examples;
  SASRecorder recorder;
};

/// Random-simulation episodes over `windows`. With a network the priors come
/// from its policy head, otherwise they are uniform. Every rollout is offered
/// to the recorder.
TrainingData generate_training_data(std::span<const TimeSeries> windows,
                                    const FunctionLibrary& lib, const ExperimentConfig& cfg,
                                    const PolicyValueNet* net, std::uint64_t seed);

struct TrainHistory {
  std::size_t round = 0;
  std::size_t examples = 0;
  double loss_total = 0.0;
  double loss_ps = 0.0;
  double loss_re = 0.0;
};

struct TrainResult {
  PolicyValueNet net;
  FunctionLibrary library;
  std::vector<TrainHistory> history;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
};

/// Alternates data generation and SGD epochs on `windows`, then mines the
/// recorded patterns into `base` (unless SAS is off).
TrainResult train_on_windows(std::span<const TimeSeries> windows, const ExperimentConfig& cfg,
                             const FunctionLibrary& base = FunctionLibrary());
/// Splits `dataset` into windows and trains on the training share.
TrainResult train(const TimeSeries& dataset, const ExperimentConfig& cfg,
                  const FunctionLibrary& base = FunctionLibrary());

struct FitResult {
  ExpressionPath backbone;
  std::string expression_text;
  std::vector<double> coefficients;
  double reward = 0.0;
  /// NaN when undefined; see the flags.
  double r2 = 0.0;
  double corr = 0.0;
  bool r2_defined = true;
  bool corr_defined = true;
  double elapsed_seconds = 0.0;
  StepCounter counter;
  /// Raw value = offset + scale * expression value (identity unless normalized).
  double value_offset = 0.0;
  double value_scale = 1.0;

  std::vector<double> predict_at(std::span<const double> timestamps) const;
};

/// Search for a backbone on `series`, fit its coefficients and score it on
/// the same points.
FitResult fit_series(const TimeSeries& series, const PolicyValueNet* net,
                     const FunctionLibrary& lib, const ExperimentConfig& cfg, std::uint64_t seed);

struct WindowReport {
  std::size_t index = 0;
  FitResult fit;
};

struct EvaluationReport {
  std::size_t window_length = 0;
  std::vector<WindowReport> rows;
  double mean_r2 = 0.0;
  double mean_corr = 0.0;
  std::size_t r2_count = 0;
  std::size_t corr_count = 0;
  double total_seconds = 0.0;
  double atc = 0.0;
  StepCounter counter;
};

/// Fits every window, `cfg.workers` at a time. Window i uses seed
/// derive_seed(cfg.seed, i), so the rows do not depend on the worker count.
EvaluationReport evaluate_windows(std::span<const TimeSeries> windows, const PolicyValueNet* net,
                                  const FunctionLibrary& lib, const ExperimentConfig& cfg);
/// Evaluates the test share of `dataset`.
EvaluationReport evaluate(const TimeSeries& dataset, const PolicyValueNet* net,
                          const FunctionLibrary& lib, const ExperimentConfig& cfg);

struct ExtrapolationResult {
  FitResult fit;
  std::vector<double> timestamps;
  std::vector<double> predictions;
  std::vector<double> actual;
  double r2 = 0.0;
  double corr = 0.0;
  bool r2_defined = true;
  bool corr_defined = true;
};

/// Fits on the first fit_length points and predicts the next horizon points.
ExtrapolationResult extrapolate(const TimeSeries& series, const PolicyValueNet* net,
                                const FunctionLibrary& lib, const ExperimentConfig& cfg,
                                std::uint64_t seed);

}  // namespace symts
