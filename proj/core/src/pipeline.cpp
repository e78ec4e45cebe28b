#include "symts/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "symts/error.hpp"
#include "symts/metrics.hpp"
#include "symts/random.hpp"
#include "symts/reward.hpp"

namespace symts {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPerfectFitError = 1e-9;

bool is_constant(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

struct Scores {
  double r2 = kNaN;
  double corr = kNaN;
  bool r2_defined = false;
  bool corr_defined = false;
};

Scores score(std::span<const double> pred, std::span<const double> actual, double abs_error) {
  Scores s;
  if (pred.size() < 2 || !std::all_of(pred.begin(), pred.end(), [](double p) {
        return std::isfinite(p);
      })) {
    return s;
  }
  if (is_constant(actual)) {
    if (abs_error < kPerfectFitError) {
      s.r2 = 1.0;
      s.r2_defined = true;
    }
    return s;
  }
  s.r2 = r_squared(pred, actual);
  s.r2_defined = true;
  if (!is_constant(pred)) {
    s.corr = corr(pred, actual);
    s.corr_defined = true;
  }
  return s;
}

std::vector<double> predict(const ExpressionTree& tree, std::span<const double> coeffs,
                            std::span<const double> timestamps) {
  std::vector<double> out(timestamps.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tree.evaluate(coeffs, timestamps[i]);
  return out;
}

double absolute_error(std::span<const double> pred, std::span<const double> actual) {
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) err += std::abs(actual[i] - pred[i]);
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

}  // namespace

std::size_t default_iterations(std::size_t window_length) noexcept {
  return window_length >= 72 ? 300 : 200;
}

void ExperimentConfig::validate() const {
  if (window_length < 2) throw Error(ErrorKind::Configuration, "window_length must be >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::Configuration, "train_fraction must lie strictly inside (0, 1)");
  }
  if (fit_length < 2) throw Error(ErrorKind::Configuration, "fit_length must be >= 2");
  if (horizon < 2) throw Error(ErrorKind::Configuration, "horizon must be >= 2");
  if (episodes_per_window == 0) {
    throw Error(ErrorKind::Configuration, "episodes_per_window must be >= 1");
  }
  if (training_iterations == 0) {
    throw Error(ErrorKind::Configuration, "training_iterations must be >= 1");
  }
  if (workers == 0) throw Error(ErrorKind::Configuration, "workers must be >= 1");
  search.validate();
  optimizer.validate();
  net.validate();
  train.validate();
}

std::vector<TimeSeries> sliding_windows(const TimeSeries& series, std::size_t length,
                                        std::size_t stride) {
  if (length < 2 || stride == 0) {
    throw Error(ErrorKind::Configuration, "window length must be >= 2 and stride >= 1");
  }
  if (series.size() < length) {
    throw Error(ErrorKind::InsufficientData, "series of length " + std::to_string(series.size()) +
                                                 " is shorter than window " +
                                                 std::to_string(length));
  }
  std::vector<TimeSeries> out;
  for (std::size_t off = 0; off + length <= series.size(); off += stride) {
    out.push_back(series.slice(off, length, true));
  }
  return out;
}

WindowSplit split_windows(std::vector<TimeSeries> windows, double train_fraction) {
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "no windows to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::Configuration, "train_fraction must lie strictly inside (0, 1)");
  }
  const auto n = windows.size();
  auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n);
  WindowSplit split;
  auto mid = windows.begin() + static_cast<std::ptrdiff_t>(n_train);
  split.train.assign(std::make_move_iterator(windows.begin()), std::make_move_iterator(mid));
  split.test.assign(std::make_move_iterator(mid), std::make_move_iterator(windows.end()));
  return split;
}

TrainingData generate_training_data(std::span<const TimeSeries> windows,
                                    const FunctionLibrary& lib, const ExperimentConfig& cfg,
                                    const PolicyValueNet* net, std::uint64_t seed) {
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "no training windows");
  SearchConfig sc = cfg.search;
  sc.mode = net ? SearchMode::NoRewardEstimator : SearchMode::NoPvn;
  sc.collect_training = true;
  sc.iterations_per_episode = cfg.training_iterations;

  TrainingData out{{}, SASRecorder(cfg.sas)};
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (std::size_t e = 0; e < cfg.episodes_per_window; ++e) {
      Rng rng(derive_seed(seed, w * cfg.episodes_per_window + e));
      EpisodeResult ep = run_episode(cfg.normalize ? windows[w].standardized() : windows[w], sc,
                                     net, lib, rng);
      std::move(ep.examples.begin(), ep.examples.end(), std::back_inserter(out.examples));
      for (const auto& [path, r] : ep.rollouts) out.recorder.record(path, r);
    }
  }
  return out;
}

TrainResult train_on_windows(std::span<const TimeSeries> windows, const ExperimentConfig& cfg,
                             const FunctionLibrary& base) {
  cfg.validate();
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "no training windows");
  NetConfig nc = cfg.net;
  nc.action_count = kSymbolCount;
  nc.window_length = cfg.window_length;

  TrainResult result{PolicyValueNet(nc, derive_seed(cfg.seed, 0)), base.without_augmented(),
                     {}, windows.size(), 0};
  SASRecorder recorder(cfg.sas);
  std::vector<TrainingExample> replay;
  Rng shuffle_rng(derive_seed(cfg.seed, 1));

  for (std::size_t round = 0; round < cfg.training_rounds; ++round) {
    TrainingData data = generate_training_data(windows, result.library, cfg, &result.net,
                                               derive_seed(cfg.seed, 100 + round));
    if (cfg.use_sas) recorder.merge(data.recorder);
    std::move(data.examples.begin(), data.examples.end(), std::back_inserter(replay));

    TrainHistory h;
    h.round = round;
    h.examples = replay.size();
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
      std::shuffle(replay.begin(), replay.end(), shuffle_rng);
      for (std::size_t at = 0; at < replay.size(); at += cfg.train.batch_size) {
        const std::size_t n = std::min(cfg.train.batch_size, replay.size() - at);
        const TrainStepResult r =
            train_step(result.net, std::span<const TrainingExample>(replay).subspan(at, n),
                       cfg.train);
        h.loss_total += r.loss_total;
        h.loss_ps += r.loss_ps;
        h.loss_re += r.loss_re;
        ++steps;
      }
    }
    if (steps) {
      const auto k = static_cast<double>(steps);
      h.loss_total /= k;
      h.loss_ps /= k;
      h.loss_re /= k;
    }
    result.history.push_back(h);
  }
  if (cfg.use_sas) result.library = mine_top_k(recorder, result.library);
  return result;
}

TrainResult train(const TimeSeries& dataset, const ExperimentConfig& cfg,
                  const FunctionLibrary& base) {
  WindowSplit split = split_windows(
      sliding_windows(dataset, cfg.window_length, cfg.effective_stride()), cfg.train_fraction);
  TrainResult r = train_on_windows(split.train, cfg, base);
  r.test_windows = split.test.size();
  return r;
}

std::vector<double> FitResult::predict_at(std::span<const double> timestamps) const {
  std::vector<double> v = predict(to_tree(backbone), coefficients, timestamps);
  for (double& x : v) x = value_offset + value_scale * x;
  return v;
}

FitResult fit_series(const TimeSeries& raw, const PolicyValueNet* net, const FunctionLibrary& lib,
                     const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  FitResult out;
  if (cfg.normalize) {
    const auto v = raw.values();
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    out.value_offset = mean;
    out.value_scale = sd > 0.0 ? sd : 1.0;
  }
  const TimeSeries series = cfg.normalize ? raw.standardized() : raw;
  Rng rng(seed);
  EpisodeResult ep = run_episode(series, cfg.search, net, lib, rng);

  // The visit-count backbone competes with the best expression any rollout
  // reached; both are refit with the final optimizer.
  std::vector<ExpressionPath> candidates{ep.backbone};
  if (!ep.rollouts.empty()) {
    auto best = std::max_element(ep.rollouts.begin(), ep.rollouts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    if (!(best->first == ep.backbone)) candidates.push_back(best->first);
  }

  OptimizerConfig oc = cfg.optimizer;
  oc.seed = derive_seed(seed, 1);
  double best_error = 0.0;
  bool have = false;
  for (const ExpressionPath& path : candidates) {
    const ExpressionTree tree = to_tree(path);
    CoefficientFit fit = fit_coefficients(tree, series, oc);
    ++out.counter.coefficient_fits;
    const double r = reward_from_error(fit.abs_error, tree.size(), cfg.search.reward);
    if (!have || r > out.reward) {
      out.backbone = path;
      out.coefficients = std::move(fit.coeffs);
      out.reward = r;
      best_error = fit.abs_error;
      have = true;
    }
  }

  const ExpressionTree tree = to_tree(out.backbone);
  out.expression_text = tree.to_infix(out.coefficients);
  if (cfg.normalize) {
    out.expression_text = "(" + format_number(out.value_offset) + " + (" +
                          format_number(out.value_scale) + " * " + out.expression_text + "))";
  }
  const std::vector<double> pred = out.predict_at(raw.timestamps());
  if (cfg.normalize) best_error = absolute_error(pred, raw.values());
  const Scores s = score(pred, raw.values(), best_error);
  out.r2 = s.r2;
  out.corr = s.corr;
  out.r2_defined = s.r2_defined;
  out.corr_defined = s.corr_defined;
  const std::uint64_t final_fits = out.counter.coefficient_fits;
  out.counter = ep.counter;
  out.counter.coefficient_fits += final_fits;
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

EvaluationReport evaluate_windows(std::span<const TimeSeries> windows, const PolicyValueNet* net,
                                  const FunctionLibrary& lib, const ExperimentConfig& cfg) {
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "no windows to evaluate");
  cfg.search.validate();
  if (needs_network(cfg.search.mode) && net == nullptr) {
    throw Error(ErrorKind::Configuration, "search mode " + std::string(to_string(cfg.search.mode)) +
                                              " requires a network");
  }
  EvaluationReport report;
  report.window_length = windows.front().size();
  report.rows.resize(windows.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= windows.size()) return;
      try {
        report.rows[i] = {i, fit_series(windows[i], net, lib, cfg, derive_seed(cfg.seed, i))};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(windows.size());
        return;
      }
    }
  };
  const std::size_t n_workers = std::min(std::max<std::size_t>(cfg.workers, 1), windows.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (const WindowReport& row : report.rows) {
    if (row.fit.r2_defined) {
      report.mean_r2 += row.fit.r2;
      ++report.r2_count;
    }
    if (row.fit.corr_defined) {
      report.mean_corr += row.fit.corr;
      ++report.corr_count;
    }
    report.total_seconds += row.fit.elapsed_seconds;
    report.counter += row.fit.counter;
  }
  report.mean_r2 = report.r2_count ? report.mean_r2 / static_cast<double>(report.r2_count) : kNaN;
  report.mean_corr =
      report.corr_count ? report.mean_corr / static_cast<double>(report.corr_count) : kNaN;
  report.atc = atc(std::chrono::duration<double>(report.total_seconds), report.rows.size());
  return report;
}

EvaluationReport evaluate(const TimeSeries& dataset, const PolicyValueNet* net,
                          const FunctionLibrary& lib, const ExperimentConfig& cfg) {
  WindowSplit split = split_windows(
      sliding_windows(dataset, cfg.window_length, cfg.effective_stride()), cfg.train_fraction);
  if (split.test.empty()) throw Error(ErrorKind::InsufficientData, "no test windows");
  return evaluate_windows(split.test, net, lib, cfg);
}

ExtrapolationResult extrapolate(const TimeSeries& series, const PolicyValueNet* net,
                                const FunctionLibrary& lib, const ExperimentConfig& cfg,
                                std::uint64_t seed) {
  if (series.size() < cfg.fit_length + cfg.horizon) {
    throw Error(ErrorKind::InsufficientData,
                "extrapolation needs " + std::to_string(cfg.fit_length + cfg.horizon) +
                    " points, series has " + std::to_string(series.size()));
  }
  ExtrapolationResult out;
  out.fit = fit_series(series.slice(0, cfg.fit_length, false), net, lib, cfg, seed);

  auto ts = series.timestamps().subspan(cfg.fit_length, cfg.horizon);
  auto vs = series.values().subspan(cfg.fit_length, cfg.horizon);
  out.timestamps.assign(ts.begin(), ts.end());
  out.actual.assign(vs.begin(), vs.end());
  out.predictions = out.fit.predict_at(ts);
  const Scores s = score(out.predictions, out.actual, absolute_error(out.predictions, out.actual));
  out.r2 = s.r2;
  out.corr = s.corr;
  out.r2_defined = s.r2_defined;
  out.corr_defined = s.corr_defined;
  return out;
}

}  // namespace symts
