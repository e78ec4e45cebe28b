#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "symts/expr.hpp"
#include "symts/library.hpp"
#include "symts/optimizer.hpp"
#include "symts/pvnet.hpp"
#include "symts/random.hpp"
#include "symts/reward.hpp"
#include "symts/time_series.hpp"

namespace symts {

enum class SearchMode {
  Full,               // PUCT with learned priors, value-head simulation
  NoPolicySelector,   // UCB with uniform priors, value-head simulation
  NoRewardEstimator,  // PUCT with learned priors, random rollouts
  NoPvn,              // UCB with uniform priors, random rollouts
};

std::string_view to_string(SearchMode mode) noexcept;
bool uses_policy_prior(SearchMode mode) noexcept;
bool uses_value_head(SearchMode mode) noexcept;
inline bool needs_network(SearchMode mode) noexcept { return mode != SearchMode::NoPvn; }

/// Instrumentation accumulated over one or more episodes.
struct StepCounter {
  std::uint64_t simulation_steps = 0;
  std::uint64_t simulations = 0;
  std::uint64_t network_calls = 0;
  std::uint64_t coefficient_fits = 0;
  double select_seconds = 0.0;
  double expand_seconds = 0.0;
  double simulate_seconds = 0.0;
  double backprop_seconds = 0.0;

  StepCounter& operator+=(const StepCounter& other);
};

struct SearchConfig {
  double c = 1.0;
  std::size_t max_path_length = 20;
  std::size_t iterations_per_episode = 200;
  /// Upper bound on extension steps within one random rollout.
  std::size_t rollout_steps = 200;
  SearchMode mode = SearchMode::Full;
  RewardConfig reward;
  /// Coefficient fitting used to score rollouts.
  OptimizerConfig rollout_optimizer{
      .max_outer_iters = 20, .f_tol = 1e-6, .line_search_tol = 1e-6, .n_restarts = 1,
      .init_scale = 2.0, .screen_samples = 32, .seed = 0};
  bool collect_training = false;

  void validate() const;
};

struct SearchNode {
  std::optional<Symbol> action;  // empty at the root
  ExpressionPath path;
  double q_total = 0.0;
  std::uint64_t n_visits = 0;
  double prior = 1.0;
  std::size_t parent = 0;
  /// Sorted by symbol; second is the child's index in the tree.
  std::vector<std::pair<Symbol, std::size_t>> children;
  std::vector<Symbol> untried;
  std::vector<Symbol> eligible;
  /// Times simulation started at this node.
  std::uint64_t self_simulations = 0;
  double first_reward = 0.0;
  /// Network prior over all actions, filled lazily.
  std::vector<double> policy;

  double mean_q() const noexcept {
    return q_total / static_cast<double>(n_visits > 0 ? n_visits : 1);
  }
  bool is_terminal(std::size_t max_length) const noexcept {
    return path.is_complete() || path.size() >= max_length;
  }
  std::optional<std::size_t> child(Symbol a) const noexcept;
};

/// Arena of search nodes; index 0 is the root.
class SearchTree {
 public:
  SearchTree(const FunctionLibrary& lib, std::size_t max_length);

  SearchNode& node(std::size_t i) { return nodes_[i]; }
  const SearchNode& node(std::size_t i) const { return nodes_[i]; }
  const SearchNode& root() const { return nodes_[0]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const SearchNode> nodes() const noexcept { return nodes_; }

  std::size_t add_child(std::size_t parent, Symbol action, ExpressionPath path, double prior,
                        std::vector<Symbol> eligible);

 private:
  std::vector<SearchNode> nodes_;
};

/// Q + c * P * sqrt(sum_b N_b) / (1 + N).
double puct_value(double q, double prior, double sum_visits, double visits, double c) noexcept;
/// Q + c * sqrt(ln(sum_b N_b) / (1 + N)).
double ucb_value(double q, double sum_visits, double visits, double c) noexcept;

double puct_score(const SearchTree& tree, std::size_t parent, Symbol action, double c);
double ucb_score(const SearchTree& tree, std::size_t parent, Symbol action, double c);

/// Root-to-node index path. Descends through fully expanded, non-terminal
/// nodes by the mode's score; ties go to the lowest symbol id.
std::vector<std::size_t> select(const SearchTree& tree, const SearchConfig& cfg);

/// Per-episode state shared by the expansion and simulation phases.
class EpisodeContext {
 public:
  EpisodeContext(const TimeSeries& series, const SearchConfig& cfg, const PolicyValueNet* net,
                 const FunctionLibrary& lib);

  const TimeSeries& series() const noexcept { return series_; }
  const SearchConfig& config() const noexcept { return cfg_; }
  const PolicyValueNet* net() const noexcept { return net_; }
  const FunctionLibrary& library() const noexcept { return lib_; }
  StepCounter& counter() noexcept { return counter_; }
  const StepCounter& counter() const noexcept { return counter_; }

  /// Network output at `path`; one forward pass per call.
  NetOutput network_eval(const ExpressionPath& path);
  /// Fits coefficients for a complete path and returns its reward, memoized.
  double score_complete(const ExpressionPath& path);

  /// Complete rollout paths and their rewards, in order.
  std::vector<std::pair<ExpressionPath, double>> rollouts;

 private:
  const TimeSeries& series_;
  const SearchConfig& cfg_;
  const PolicyValueNet* net_;
  const FunctionLibrary& lib_;
  std::optional<SeriesEncoding> encoding_;
  std::unordered_map<std::string, double> reward_cache_;
  StepCounter counter_;
};

/// Adds one untried action of `node` as a new child, drawn uniformly; the
/// augmented token inlines a secondary-sampled pattern. Returns the child.
std::size_t expand(SearchTree& tree, std::size_t node, EpisodeContext& ctx, Rng& rng);

/// Reward estimate for the state at `node`: one value-head call, or a random
/// rollout followed by a coefficient fit, depending on the mode.
double simulate(SearchTree& tree, std::size_t node, EpisodeContext& ctx, Rng& rng);

/// Adds `reward` to every node on `path` (root first).
void backpropagate(SearchTree& tree, std::span<const std::size_t> path, double reward);

/// Backbone by maximum visit count per level, autocompleted.
ExpressionPath extract_backbone(const SearchTree& tree);

/// Normalized score distribution over all actions at `node`, used as the
/// policy training target: shift to be nonnegative, add 1e-6, normalize over
/// the node's eligible actions.
std::vector<double> score_distribution(const SearchTree& tree, std::size_t node,
                                       const SearchConfig& cfg, std::size_t action_count);

struct EpisodeResult {
  ExpressionPath backbone;
  std::vector<TrainingExample> examples;
  std::vector<std::pair<ExpressionPath, double>> rollouts;
  StepCounter counter;
  std::uint64_t root_visits = 0;
  std::size_t tree_size = 0;
};

/// Runs `iterations_per_episode` rounds of select, expand, simulate and
/// backpropagate from a fresh root.
EpisodeResult run_episode(const TimeSeries& series, const SearchConfig& cfg,
                          const PolicyValueNet* net, const FunctionLibrary& lib, Rng& rng);

}  // namespace symts
