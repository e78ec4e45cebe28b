#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "symts/error.hpp"
#include "symts/expr.hpp"
#include "symts/pvnet.hpp"
#include "symts/random.hpp"

namespace symts {
namespace {

using S = Symbol;

NetConfig tiny() {
  NetConfig c;
  c.embedding_dim = 2;
  c.hidden_dim = 2;
  c.trunk_layers = 1;
  c.tcn_levels = 1;
  c.kernel_size = 2;
  c.window_length = 6;
  return c;
}

std::vector<double> softmax_of(std::vector<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - m));
  for (double& v : z) v /= sum;
  return z;
}

TrainingExample random_example(Rng& rng, std::size_t actions, std::size_t window) {
  TrainingExample ex;
  const std::size_t len = uniform_index(rng, 5);
  for (std::size_t i = 0; i < len; ++i) ex.path_tokens.push_back(*symbol_from_index(uniform_index(rng, 12)));
  for (std::size_t i = 0; i < window; ++i) ex.series_window.push_back(std::sin(0.3 * i) + uniform_unit(rng));
  std::vector<double> z(actions);
  for (double& v : z) v = 3.0 * uniform_unit(rng);
  ex.target_policy = softmax_of(z);
  ex.target_reward = uniform_unit(rng);
  return ex;
}

std::string temp_file(std::string_view name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(PolicyValueNet, FreshNetIsUniform) {
  const PolicyValueNet net;
  const std::vector<double> series(36, 1.0);
  const std::vector<Symbol> path{S::Add, S::Var};
  const NetOutput out = net.forward(path, series);
  ASSERT_EQ(out.prior.size(), kSymbolCount);
  for (double p : out.prior) EXPECT_DOUBLE_EQ(p, 1.0 / kSymbolCount);
  EXPECT_DOUBLE_EQ(out.value, 0.5);
}

TEST(PolicyValueNet, Deterministic) {
  PolicyValueNet net(NetConfig{}, 3);
  net.randomize(4, 0.3);
  std::vector<double> series(36);
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = std::cos(0.2 * i);
  const std::vector<Symbol> path{S::Mul, S::Const};
  const NetOutput a = net.forward(path, series);
  const NetOutput b = net.forward(path, series);
  EXPECT_EQ(a.prior, b.prior);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(PolicyValueNet(NetConfig{}, 3), PolicyValueNet(NetConfig{}, 3));
}

TEST(PolicyValueNet, OutputsStayValidUnderRandomWeights) {
  Rng rng(17);
  PolicyValueNet net(tiny(), 1);
  for (int trial = 0; trial < 1000; ++trial) {
    net.randomize(trial, 0.5 + 3.0 * uniform_unit(rng));
    const TrainingExample ex = random_example(rng, kSymbolCount, 6);
    const NetOutput out = net.forward(ex.path_tokens, ex.series_window);
    double sum = 0.0;
    for (double p : out.prior) {
      ASSERT_GE(p, 0.0);
      sum += p;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
    ASSERT_GT(out.value, 0.0);
    ASSERT_LT(out.value, 1.0);
  }
}

TEST(PolicyValueNet, SeriesEncodingReuse) {
  PolicyValueNet net(NetConfig{}, 5);
  net.randomize(6, 0.2);
  std::vector<double> series(36);
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = 0.1 * i;
  const SeriesEncoding enc = net.encode_series(series);
  const std::vector<Symbol> path{S::Sin};
  EXPECT_EQ(net.forward(path, enc).prior, net.forward(path, series).prior);
}

TEST(PolicyValueNet, Errors) {
  const PolicyValueNet net(tiny(), 0);
  const std::vector<double> empty;
  EXPECT_THROW(net.forward(std::vector<Symbol>{}, empty), Error);
  NetConfig small = tiny();
  small.action_count = 12;
  const PolicyValueNet no_aug(small, 0);
  const std::vector<Symbol> path{S::Augmented};
  try {
    no_aug.forward(path, std::vector<double>(6, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Vocabulary);
  }
  NetConfig bad = tiny();
  bad.hidden_dim = 0;
  EXPECT_THROW(PolicyValueNet(bad, 0), Error);
}

TEST(Losses, PolicyExamples) {
  const std::vector<double> p{0.5, 0.5};
  EXPECT_NEAR(loss_policy(p, p), 0.0, 1e-9);
  const std::vector<double> t{0.9, 0.1};
  EXPECT_NEAR(loss_policy(p, t), 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-12);
  EXPECT_NEAR(loss_policy(p, t), 0.5108, 1e-4);
  EXPECT_NEAR(loss_policy(p, t, PolicyLossDirection::TargetToPrior),
              0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5), 1e-12);
  const std::vector<double> three{0.2, 0.3, 0.5};
  EXPECT_THROW(loss_policy(p, three), Error);
}

TEST(Losses, PolicyNonNegative) {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(8), b(8);
    for (double& v : a) v = 4.0 * uniform_unit(rng);
    for (double& v : b) v = 4.0 * uniform_unit(rng);
    const auto p = softmax_of(a);
    const auto q = softmax_of(b);
    EXPECT_GE(loss_policy(p, q), -1e-9);
    EXPECT_GE(loss_policy(p, q, PolicyLossDirection::TargetToPrior), -1e-9);
  }
}

TEST(Losses, ValueExamples) {
  EXPECT_EQ(loss_value(0.5, 0.5), 0.0);
  EXPECT_NEAR(loss_value(0.9, 0.4), 0.25, 1e-15);
  EXPECT_EQ(loss_value(0.3, 0.8), loss_value(0.8, 0.3));
}

double batch_loss(const PolicyValueNet& net, std::span<const TrainingExample> batch,
                  const TrainConfig& cfg) {
  std::vector<double> g;
  return net.loss_and_gradient(batch, cfg, g).loss_total;
}

void gradient_check(PolicyLossDirection dir) {
  Rng rng(29);
  PolicyValueNet net(tiny(), 2);
  net.randomize(7, 0.6);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_example(rng, kSymbolCount, 6));
  TrainConfig cfg;
  cfg.theta1 = 0.7;
  cfg.theta2 = 1.3;
  cfg.policy_direction = dir;

  std::vector<double> grad;
  net.loss_and_gradient(batch, cfg, grad);
  ASSERT_EQ(grad.size(), net.parameter_count());
  const double h = 1e-6;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    const double w = net.weights()[i];
    net.weights()[i] = w + h;
    const double up = batch_loss(net, batch, cfg);
    net.weights()[i] = w - h;
    const double down = batch_loss(net, batch, cfg);
    net.weights()[i] = w;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-3});
    ASSERT_LE(std::abs(numeric - grad[i]) / scale, 1e-4)
        << "parameter " << i << " analytic " << grad[i] << " numeric " << numeric;
  }
}

TEST(Gradients, MatchFiniteDifferences) { gradient_check(PolicyLossDirection::PriorToTarget); }

TEST(Gradients, MatchFiniteDifferencesTargetFirst) {
  gradient_check(PolicyLossDirection::TargetToPrior);
}

TEST(Gradients, ZeroPolicyWeightSilencesPolicyHead) {
  Rng rng(31);
  PolicyValueNet net(tiny(), 3);
  net.randomize(8, 0.5);
  std::vector<TrainingExample> batch{random_example(rng, kSymbolCount, 6)};
  TrainConfig cfg;
  cfg.theta1 = 0.0;
  std::vector<double> grad;
  net.loss_and_gradient(batch, cfg, grad);
  const auto [lo, hi] = net.policy_head_range();
  ASSERT_LT(lo, hi);
  for (std::size_t i = lo; i < hi; ++i) EXPECT_EQ(grad[i], 0.0) << i;
}

TEST(TrainStep, LossDecomposition) {
  Rng rng(37);
  PolicyValueNet net(tiny(), 4);
  net.randomize(9, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_example(rng, kSymbolCount, 6));
    TrainConfig cfg;
    cfg.theta1 = 2.0 * uniform_unit(rng);
    cfg.theta2 = 2.0 * uniform_unit(rng) + 0.01;
    const TrainStepResult r = train_step(net, batch, cfg);
    EXPECT_NEAR(r.loss_total, cfg.theta1 * r.loss_ps + cfg.theta2 * r.loss_re, 1e-9);
  }
}

TEST(TrainStep, OverfitsOneExample) {
  Rng rng(41);
  PolicyValueNet net(tiny(), 5);
  std::vector<TrainingExample> batch{random_example(rng, kSymbolCount, 6)};
  batch[0].target_reward = 0.95;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  const double first = train_step(net, batch, cfg).loss_total;
  double last = first;
  for (int i = 1; i < 100; ++i) last = train_step(net, batch, cfg).loss_total;
  EXPECT_LE(last, 0.5 * first);
}

TEST(TrainStep, RejectsBadExamples) {
  Rng rng(43);
  PolicyValueNet net(tiny(), 6);
  std::vector<TrainingExample> batch{random_example(rng, kSymbolCount, 6)};
  batch[0].target_policy.pop_back();
  EXPECT_THROW(train_step(net, batch, TrainConfig{}), Error);
  EXPECT_THROW(train_step(net, std::span<const TrainingExample>{}, TrainConfig{}), Error);
  TrainConfig none;
  none.theta1 = 0.0;
  none.theta2 = 0.0;
  EXPECT_THROW(none.validate(), Error);
}

TEST(Weights, RoundTrip) {
  PolicyValueNet net(NetConfig{}, 11);
  net.randomize(12, 0.4);
  const std::string file = temp_file("symts_weights_roundtrip.bin");
  save_weights(net, file);
  const PolicyValueNet back = load_weights(file, NetConfig{});
  EXPECT_EQ(back, net);

  Rng rng(47);
  for (int i = 0; i < 100; ++i) {
    const TrainingExample ex = random_example(rng, kSymbolCount, 36);
    const NetOutput a = net.forward(ex.path_tokens, ex.series_window);
    const NetOutput b = back.forward(ex.path_tokens, ex.series_window);
    ASSERT_EQ(a.prior, b.prior);
    ASSERT_EQ(a.value, b.value);
  }

  const std::string again = temp_file("symts_weights_roundtrip2.bin");
  save_weights(back, again);
  std::ifstream x(file, std::ios::binary), y(again, std::ios::binary);
  const std::string bx((std::istreambuf_iterator<char>(x)), {});
  const std::string by((std::istreambuf_iterator<char>(y)), {});
  EXPECT_EQ(bx, by);
  std::filesystem::remove(file);
  std::filesystem::remove(again);
}

ErrorKind load_error(const std::string& file, const NetConfig* expected) {
  try {
    if (expected) load_weights(file, *expected);
    else load_weights(file);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Contract;
}

TEST(Weights, TruncatedAndMismatched) {
  const PolicyValueNet net(tiny(), 13);
  const std::string file = temp_file("symts_weights_bad.bin");
  save_weights(net, file);
  const auto full = std::filesystem::file_size(file);

  NetConfig other = tiny();
  other.action_count = 12;
  EXPECT_EQ(load_error(file, &other), ErrorKind::Format);

  std::filesystem::resize_file(file, full - 5);
  EXPECT_EQ(load_error(file, nullptr), ErrorKind::Format);
  std::filesystem::resize_file(file, 3);
  EXPECT_EQ(load_error(file, nullptr), ErrorKind::Format);
  std::filesystem::remove(file);
  EXPECT_EQ(load_error(file, nullptr), ErrorKind::Io);
}

}  // namespace
}  // namespace symts
