#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "symts/expr.hpp"

namespace symts {

struct NetConfig {
  std::size_t action_count = kSymbolCount;
  std::size_t embedding_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t trunk_layers = 2;
  /// Causal convolution levels; level l uses dilation 2^l.
  std::size_t tcn_levels = 3;
  std::size_t kernel_size = 3;
  std::size_t window_length = 36;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

enum class PolicyLossDirection {
  /// sum_a P(a) log(P(a) / target(a)), prior first.
  PriorToTarget,
  /// sum_a target(a) log(target(a) / P(a)).
  TargetToPrior,
};

struct TrainConfig {
  double theta1 = 1.0;  // policy loss weight
  double theta2 = 1.0;  // value loss weight
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  /// Global gradient-norm clip; 0 disables clipping.
  double max_grad_norm = 0.0;
  PolicyLossDirection policy_direction = PolicyLossDirection::PriorToTarget;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One supervision tuple gathered during search.
struct TrainingExample {
  std::vector<Symbol> path_tokens;
  std::vector<double> series_window;
  std::vector<double> target_policy;  // sums to 1 over action_count entries
  double target_reward = 0.0;         // in [0, 1]

  void validate(std::size_t action_count) const;
};

struct NetOutput {
  std::vector<double> prior;  // softmax over action_count entries
  double value = 0.5;         // logistic, strictly inside (0, 1)
};

struct TrainStepResult {
  double loss_total = 0.0;
  double loss_ps = 0.0;
  double loss_re = 0.0;
};

/// Series-side state, reusable across forward passes on the same window.
struct SeriesEncoding {
  std::vector<double> state;
};

/// Policy-value network.
///
/// The expression path is embedded token by token and run through an LSTM
/// whose final hidden state represents the path. The series window is
/// standardized and encoded by a stack of dilated causal convolutions, whose
/// last-time-step output represents the series. The concatenation passes
/// through a tanh MLP trunk into a softmax policy head and a logistic value
/// head. Gradients are hand-derived backpropagation through time.
class PolicyValueNet {
 public:
  /// Random hidden layers, zero output heads (uniform prior, value 0.5).
  explicit PolicyValueNet(NetConfig cfg = {}, std::uint64_t seed = 0);

  const NetConfig& config() const noexcept { return cfg_; }
  std::size_t parameter_count() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  /// Range of the weight vector covering the policy head (weights and bias).
  std::pair<std::size_t, std::size_t> policy_head_range() const noexcept;

  /// Re-initializes every parameter, heads included, uniformly in [-scale, scale].
  void randomize(std::uint64_t seed, double scale);

  SeriesEncoding encode_series(std::span<const double> series) const;
  NetOutput forward(std::span<const Symbol> path, const SeriesEncoding& series) const;
  NetOutput forward(std::span<const Symbol> path, std::span<const double> series) const;

  /// Mean loss over `batch` and its gradient with respect to every weight.
  TrainStepResult loss_and_gradient(std::span<const TrainingExample> batch,
                                    const TrainConfig& cfg, std::vector<double>& grad) const;

  void save(const std::filesystem::path& file) const;
  static PolicyValueNet load(const std::filesystem::path& file);

  friend bool operator==(const PolicyValueNet& a, const PolicyValueNet& b) {
    return a.cfg_ == b.cfg_ && a.weights_ == b.weights_;
  }

 private:
  struct Layout;
  struct Cache;

  PolicyValueNet(NetConfig cfg, std::vector<double> weights);

  std::vector<double> prepare_window(std::span<const double> series) const;
  void encode_path(std::span<const Symbol> path, Cache* cache, std::vector<double>& h) const;
  void encode_series_into(std::span<const double> series, Cache* cache,
                          std::vector<double>& state) const;
  NetOutput heads(const std::vector<double>& path_state, const std::vector<double>& series_state,
                  Cache* cache) const;
  void backward(const Cache& cache, std::span<const double> dlogits, double dvalue_pre,
                std::vector<double>& grad) const;

  NetConfig cfg_;
  std::vector<double> weights_;
};

double loss_policy(std::span<const double> prior, std::span<const double> target,
                   PolicyLossDirection direction = PolicyLossDirection::PriorToTarget);
double loss_value(double estimate, double simulated);

/// One plain gradient-descent step on theta1 * Loss_PS + theta2 * Loss_RE.
/// Returns the losses measured before the update.
TrainStepResult train_step(PolicyValueNet& net, std::span<const TrainingExample> batch,
                           const TrainConfig& cfg);

void save_weights(const PolicyValueNet& net, const std::filesystem::path& file);
PolicyValueNet load_weights(const std::filesystem::path& file);
/// Also checks that the stored architecture equals `expected`.
PolicyValueNet load_weights(const std::filesystem::path& file, const NetConfig& expected);

}  // namespace symts
