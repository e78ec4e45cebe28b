#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "symts/expr.hpp"
#include "symts/library.hpp"
#include "symts/mcts.hpp"
#include "symts/optimizer.hpp"
#include "symts/pipeline.hpp"
#include "symts/pvnet.hpp"
#include "symts/reward.hpp"
#include "symts/time_series.hpp"

namespace {

using namespace symts;

TimeSeries sample_series(std::size_t n) {
  std::vector<double> t(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i);
    v[i] = std::sin(0.4 * t[i]) + 0.5 * t[i];
  }
  return TimeSeries(t, v);
}

void BM_Reward(benchmark::State& state) {
  const TimeSeries s = sample_series(static_cast<std::size_t>(state.range(0)));
  const ExpressionTree tree = to_tree(parse_prefix("add sin mul C t mul C t"));
  const std::vector<double> c{0.4, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(reward(s, tree, c, RewardConfig{}));
}
BENCHMARK(BM_Reward)->Arg(36)->Arg(72);

void BM_FitCoefficients(benchmark::State& state) {
  const TimeSeries s = sample_series(36);
  const ExpressionTree tree = to_tree(parse_prefix("add sin mul C t mul C t"));
  for (auto _ : state) benchmark::DoNotOptimize(fit_coefficients(tree, s, OptimizerConfig{}));
}
BENCHMARK(BM_FitCoefficients);

void BM_NetForward(benchmark::State& state) {
  const PolicyValueNet net(NetConfig{}, 1);
  const TimeSeries s = sample_series(36);
  const std::vector<Symbol> path{Symbol::Add, Symbol::Sin, Symbol::Mul};
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(path, s.values()));
}
BENCHMARK(BM_NetForward);

void BM_EpisodeNoPvn(benchmark::State& state) {
  const TimeSeries s = sample_series(36);
  ExperimentConfig cfg;
  cfg.search.mode = SearchMode::NoPvn;
  cfg.search.iterations_per_episode = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_series(s, nullptr, FunctionLibrary(), cfg, 1));
  }
}
BENCHMARK(BM_EpisodeNoPvn)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EpisodeFull(benchmark::State& state) {
  const TimeSeries s = sample_series(36);
  const PolicyValueNet net(NetConfig{}, 1);
  ExperimentConfig cfg;
  cfg.search.iterations_per_episode = 200;
  for (auto _ : state) benchmark::DoNotOptimize(fit_series(s, &net, FunctionLibrary(), cfg, 1));
}
BENCHMARK(BM_EpisodeFull)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
