#include "symts/mcts.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "symts/error.hpp"

namespace symts {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double sum_child_visits(const SearchTree& tree, const SearchNode& node) {
  double sum = 0.0;
  for (const auto& [a, idx] : node.children) sum += static_cast<double>(tree.node(idx).n_visits);
  return sum;
}

// Prior of `a` at `node`: the network policy renormalized over the eligible
// set, or uniform over it.
double action_prior(const SearchNode& node, Symbol a) {
  const std::size_t n = node.eligible.size();
  if (n == 0) return 0.0;
  if (node.policy.empty()) return 1.0 / static_cast<double>(n);
  auto mass_of = [&](Symbol s) {
    const std::size_t i = index_of(s);
    return i < node.policy.size() ? node.policy[i] : 0.0;
  };
  double z = 0.0;
  for (Symbol s : node.eligible) z += mass_of(s);
  if (!(z > 0.0)) return 1.0 / static_cast<double>(n);
  return mass_of(a) / z;
}

bool mode_uses_puct(SearchMode mode) noexcept { return uses_policy_prior(mode); }

}  // namespace

std::string_view to_string(SearchMode mode) noexcept {
  switch (mode) {
    case SearchMode::Full: return "full";
    case SearchMode::NoPolicySelector: return "no_ps";
    case SearchMode::NoRewardEstimator: return "no_re";
    case SearchMode::NoPvn: return "no_pvn";
  }
  return "unknown";
}

bool uses_policy_prior(SearchMode mode) noexcept {
  return mode == SearchMode::Full || mode == SearchMode::NoRewardEstimator;
}

bool uses_value_head(SearchMode mode) noexcept {
  return mode == SearchMode::Full || mode == SearchMode::NoPolicySelector;
}

StepCounter& StepCounter::operator+=(const StepCounter& o) {
  simulation_steps += o.simulation_steps;
  simulations += o.simulations;
  network_calls += o.network_calls;
  coefficient_fits += o.coefficient_fits;
  select_seconds += o.select_seconds;
  expand_seconds += o.expand_seconds;
  simulate_seconds += o.simulate_seconds;
  backprop_seconds += o.backprop_seconds;
  return *this;
}

void SearchConfig::validate() const {
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw Error(ErrorKind::Configuration, "exploration constant must be finite and >= 0");
  }
  if (max_path_length < 3) throw Error(ErrorKind::Configuration, "max_path_length must be >= 3");
  if (iterations_per_episode < 1) {
    throw Error(ErrorKind::Configuration, "iterations_per_episode must be >= 1");
  }
  if (rollout_steps < 1) throw Error(ErrorKind::Configuration, "rollout_steps must be >= 1");
  reward.validate();
  rollout_optimizer.validate();
}

std::optional<std::size_t> SearchNode::child(Symbol a) const noexcept {
  auto it = std::lower_bound(children.begin(), children.end(), a,
                             [](const auto& entry, Symbol s) { return entry.first < s; });
  if (it == children.end() || it->first != a) return std::nullopt;
  return it->second;
}

SearchTree::SearchTree(const FunctionLibrary& lib, std::size_t max_length) {
  SearchNode root;
  root.eligible = eligible_actions(lib, root.path, max_length);
  root.untried = root.eligible;
  nodes_.push_back(std::move(root));
}

std::size_t SearchTree::add_child(std::size_t parent, Symbol action, ExpressionPath path,
                                  double prior, std::vector<Symbol> eligible) {
  if (nodes_[parent].child(action)) {
    throw Error(ErrorKind::Contract, "node already has a child for action " +
                                         std::string(name(action)));
  }
  SearchNode n;
  n.action = action;
  n.path = std::move(path);
  n.prior = prior;
  n.parent = parent;
  n.untried = eligible;
  n.eligible = std::move(eligible);
  const std::size_t idx = nodes_.size();
  nodes_.push_back(std::move(n));
  auto& kids = nodes_[parent].children;
  auto it = std::lower_bound(kids.begin(), kids.end(), action,
                             [](const auto& entry, Symbol s) { return entry.first < s; });
  kids.insert(it, {action, idx});
  return idx;
}

double puct_value(double q, double prior, double sum_visits, double visits, double c) noexcept {
  return q + c * prior * std::sqrt(sum_visits) / (1.0 + visits);
}

double ucb_value(double q, double sum_visits, double visits, double c) noexcept {
  const double ln = sum_visits > 1.0 ? std::log(sum_visits) : 0.0;
  return q + c * std::sqrt(ln / (1.0 + visits));
}

double puct_score(const SearchTree& tree, std::size_t parent, Symbol action, double c) {
  const SearchNode& p = tree.node(parent);
  const double sum = sum_child_visits(tree, p);
  if (auto idx = p.child(action)) {
    const SearchNode& ch = tree.node(*idx);
    return puct_value(ch.mean_q(), ch.prior, sum, static_cast<double>(ch.n_visits), c);
  }
  return puct_value(0.0, action_prior(p, action), sum, 0.0, c);
}

double ucb_score(const SearchTree& tree, std::size_t parent, Symbol action, double c) {
  const SearchNode& p = tree.node(parent);
  const double sum = sum_child_visits(tree, p);
  if (auto idx = p.child(action)) {
    const SearchNode& ch = tree.node(*idx);
    return ucb_value(ch.mean_q(), sum, static_cast<double>(ch.n_visits), c);
  }
  return ucb_value(0.0, sum, 0.0, c);
}

std::vector<std::size_t> select(const SearchTree& tree, const SearchConfig& cfg) {
  std::vector<std::size_t> path{0};
  std::size_t idx = 0;
  const bool puct = mode_uses_puct(cfg.mode);
  while (true) {
    const SearchNode& n = tree.node(idx);
    if (n.is_terminal(cfg.max_path_length) || !n.untried.empty() || n.children.empty()) break;
    std::size_t best = n.children.front().second;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& [a, child] : n.children) {
      const double s = puct ? puct_score(tree, idx, a, cfg.c) : ucb_score(tree, idx, a, cfg.c);
      if (s > best_score) {
        best_score = s;
        best = child;
      }
    }
    path.push_back(best);
    idx = best;
  }
  return path;
}

EpisodeContext::EpisodeContext(const TimeSeries& series, const SearchConfig& cfg,
                               const PolicyValueNet* net, const FunctionLibrary& lib)
    : series_(series), cfg_(cfg), net_(net), lib_(lib) {
  if (needs_network(cfg.mode) && net == nullptr) {
    throw Error(ErrorKind::Configuration,
                "search mode " + std::string(to_string(cfg.mode)) + " requires a network");
  }
}

NetOutput EpisodeContext::network_eval(const ExpressionPath& path) {
  if (net_ == nullptr) throw Error(ErrorKind::Configuration, "no network attached");
  if (!encoding_) encoding_ = net_->encode_series(series_.values());
  ++counter_.network_calls;
  return net_->forward(path.tokens(), *encoding_);
}

double EpisodeContext::score_complete(const ExpressionPath& path) {
  std::string key = path.to_prefix();
  if (auto it = reward_cache_.find(key); it != reward_cache_.end()) return it->second;
  const ExpressionTree tree = to_tree(path);
  const CoefficientFit fit = fit_coefficients(tree, series_, cfg_.rollout_optimizer);
  ++counter_.coefficient_fits;
  const double r = reward_from_error(fit.abs_error, tree.size(), cfg_.reward);
  reward_cache_.emplace(std::move(key), r);
  return r;
}

std::size_t expand(SearchTree& tree, std::size_t idx, EpisodeContext& ctx, Rng& rng) {
  const SearchConfig& cfg = ctx.config();
  const std::size_t L = cfg.max_path_length;
  {
    const SearchNode& n = tree.node(idx);
    if (n.is_terminal(L)) throw Error(ErrorKind::TerminalNode, "cannot expand a terminal node");
    if (n.untried.empty()) throw Error(ErrorKind::ExpansionExhausted, "node is fully expanded");
  }
  if (uses_policy_prior(cfg.mode) && tree.node(idx).policy.empty()) {
    tree.node(idx).policy = ctx.network_eval(tree.node(idx).path).prior;
  }
  SearchNode& n = tree.node(idx);
  const std::size_t pick = uniform_index(rng, n.untried.size());
  const Symbol a = n.untried[pick];
  n.untried.erase(n.untried.begin() + static_cast<std::ptrdiff_t>(pick));

  ExpressionPath next = n.path;
  if (a == Symbol::Augmented) {
    next.append_pattern(secondary_sample(ctx.library(), rng, n.path, L));
  } else {
    next.push(a);
  }
  const double prior = action_prior(n, a);
  std::vector<Symbol> eligible = eligible_actions(ctx.library(), next, L);
  return tree.add_child(idx, a, std::move(next), prior, std::move(eligible));
}

double simulate(SearchTree& tree, std::size_t idx, EpisodeContext& ctx, Rng& rng) {
  const SearchConfig& cfg = ctx.config();
  StepCounter& counter = ctx.counter();
  double r = 0.0;
  if (uses_value_head(cfg.mode)) {
    NetOutput out = ctx.network_eval(tree.node(idx).path);
    if (tree.node(idx).policy.empty()) tree.node(idx).policy = std::move(out.prior);
    r = std::clamp(out.value, 0.0, 1.0);
    counter.simulation_steps += 1;
  } else {
    const std::size_t L = cfg.max_path_length;
    ExpressionPath p = tree.node(idx).path;
    std::size_t steps = 0;
    while (!p.is_complete() && p.size() < L && steps < cfg.rollout_steps) {
      std::vector<Symbol> eligible = eligible_actions(ctx.library(), p, L);
      if (eligible.empty()) break;
      const Symbol a = sample_uniform(eligible, rng);
      if (a == Symbol::Augmented) {
        p.append_pattern(secondary_sample(ctx.library(), rng, p, L));
      } else {
        p.push(a);
      }
      ++steps;
    }
    counter.simulation_steps += steps;
    ExpressionPath complete = p.autocompleted();
    r = ctx.score_complete(complete);
    ctx.rollouts.emplace_back(std::move(complete), r);
  }
  ++counter.simulations;
  SearchNode& n = tree.node(idx);
  if (n.self_simulations == 0) n.first_reward = r;
  ++n.self_simulations;
  return r;
}

void backpropagate(SearchTree& tree, std::span<const std::size_t> path, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw Error(ErrorKind::Contract, "backpropagated reward must lie in [0, 1]");
  }
  for (std::size_t idx : path) {
    SearchNode& n = tree.node(idx);
    n.q_total += reward;
    ++n.n_visits;
  }
}

ExpressionPath extract_backbone(const SearchTree& tree) {
  std::size_t idx = 0;
  while (!tree.node(idx).children.empty()) {
    const auto& kids = tree.node(idx).children;
    std::size_t best = kids.front().second;
    for (const auto& [a, child] : kids) {
      if (tree.node(child).n_visits > tree.node(best).n_visits) best = child;
    }
    idx = best;
  }
  return tree.node(idx).path.autocompleted();
}

std::vector<double> score_distribution(const SearchTree& tree, std::size_t idx,
                                       const SearchConfig& cfg, std::size_t action_count) {
  const SearchNode& n = tree.node(idx);
  std::vector<double> out(action_count, 0.0);
  std::vector<std::pair<std::size_t, double>> scores;
  for (Symbol a : n.eligible) {
    const std::size_t i = index_of(a);
    if (i >= action_count) continue;
    scores.emplace_back(i, puct_score(tree, idx, a, cfg.c));
  }
  if (scores.empty()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(action_count));
    return out;
  }
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& [i, s] : scores) lo = std::min(lo, s);
  double z = 0.0;
  for (auto& [i, s] : scores) {
    s = s - lo + 1e-6;
    z += s;
  }
  for (const auto& [i, s] : scores) out[i] = s / z;
  return out;
}

EpisodeResult run_episode(const TimeSeries& series, const SearchConfig& cfg,
                          const PolicyValueNet* net, const FunctionLibrary& lib, Rng& rng) {
  cfg.validate();
  EpisodeContext ctx(series, cfg, net, lib);
  SearchTree tree(lib, cfg.max_path_length);
  StepCounter& counter = ctx.counter();

  for (std::size_t it = 0; it < cfg.iterations_per_episode; ++it) {
    auto t0 = Clock::now();
    std::vector<std::size_t> path = select(tree, cfg);
    counter.select_seconds += seconds_since(t0);

    std::size_t leaf = path.back();
    const SearchNode& ln = tree.node(leaf);
    if (!ln.is_terminal(cfg.max_path_length) && !ln.untried.empty()) {
      t0 = Clock::now();
      leaf = expand(tree, leaf, ctx, rng);
      path.push_back(leaf);
      counter.expand_seconds += seconds_since(t0);
    }

    t0 = Clock::now();
    const double r = simulate(tree, leaf, ctx, rng);
    counter.simulate_seconds += seconds_since(t0);

    t0 = Clock::now();
    backpropagate(tree, path, r);
    counter.backprop_seconds += seconds_since(t0);
  }

  EpisodeResult result;
  result.backbone = extract_backbone(tree);
  if (cfg.collect_training) {
    const std::size_t A = net ? net->config().action_count : kSymbolCount;
    std::vector<double> window(series.values().begin(), series.values().end());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const SearchNode& n = tree.node(i);
      TrainingExample ex;
      ex.path_tokens.assign(n.path.tokens().begin(), n.path.tokens().end());
      ex.series_window = window;
      ex.target_policy = score_distribution(tree, i, cfg, A);
      ex.target_reward = std::clamp(i == 0 ? n.mean_q() : n.first_reward, 0.0, 1.0);
      result.examples.push_back(std::move(ex));
    }
  }
  result.rollouts = std::move(ctx.rollouts);
  result.counter = counter;
  result.root_visits = tree.root().n_visits;
  result.tree_size = tree.size();
  return result;
}

}  // namespace symts
