#include "symts/pvnet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "symts/error.hpp"

namespace symts {
namespace {

constexpr double kTargetFloor = 1e-12;
constexpr std::array<char, 8> kMagic{'S', 'Y', 'M', 'T', 'S', 'P', 'V', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

void softmax(std::span<const double> logits, std::vector<double>& out) {
  out.resize(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& p : out) p /= z;
}

// Loss value and its gradient with respect to the softmax logits.
double policy_loss_grad(std::span<const double> prior, std::span<const double> target,
                        PolicyLossDirection dir, std::span<double> dlogits) {
  const std::size_t n = prior.size();
  double loss = 0.0;
  if (dir == PolicyLossDirection::PriorToTarget) {
    for (std::size_t a = 0; a < n; ++a) {
      if (prior[a] > 0.0) loss += prior[a] * std::log(prior[a] / std::max(target[a], kTargetFloor));
    }
    if (!dlogits.empty()) {
      for (std::size_t a = 0; a < n; ++a) {
        const double g =
            prior[a] > 0.0 ? std::log(prior[a] / std::max(target[a], kTargetFloor)) : 0.0;
        dlogits[a] = prior[a] * (g - loss);
      }
    }
  } else {
    double mass = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      mass += target[a];
      if (target[a] > 0.0) {
        loss += target[a] * std::log(std::max(target[a], kTargetFloor) / prior[a]);
      }
    }
    if (!dlogits.empty()) {
      for (std::size_t a = 0; a < n; ++a) dlogits[a] = prior[a] * mass - target[a];
    }
  }
  return loss;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

std::uint64_t get_le(std::istream& in, int bytes, const std::string& file) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), bytes);
  if (in.gcount() != bytes) throw Error(ErrorKind::Format, "truncated weights file " + file);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace

// --- configuration ----------------------------------------------------------

void NetConfig::validate() const {
  if (action_count < 2) throw Error(ErrorKind::Configuration, "action_count must be >= 2");
  if (embedding_dim == 0 || hidden_dim == 0) {
    throw Error(ErrorKind::Configuration, "network dimensions must be positive");
  }
  if (tcn_levels == 0 || kernel_size == 0) {
    throw Error(ErrorKind::Configuration, "the series encoder needs >= 1 level and kernel >= 1");
  }
  if (window_length < 2) throw Error(ErrorKind::Configuration, "window_length must be >= 2");
  if (trunk_layers == 0) throw Error(ErrorKind::Configuration, "trunk_layers must be >= 1");
}

void TrainConfig::validate() const {
  if (theta1 < 0.0 || theta2 < 0.0 || (theta1 == 0.0 && theta2 == 0.0)) {
    throw Error(ErrorKind::Configuration, "loss weights must be >= 0 and not both 0");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Configuration, "learning_rate must be > 0");
  if (batch_size == 0) throw Error(ErrorKind::Configuration, "batch_size must be >= 1");
}

void TrainingExample::validate(std::size_t action_count) const {
  if (target_policy.size() != action_count) {
    throw Error(ErrorKind::Shape, "target policy has " + std::to_string(target_policy.size()) +
                                      " entries, network has " + std::to_string(action_count) +
                                      " actions");
  }
  double sum = 0.0;
  for (double p : target_policy) {
    if (!(p >= 0.0)) throw Error(ErrorKind::Contract, "target policy has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::Contract, "target policy must sum to 1");
  if (!(target_reward >= 0.0 && target_reward <= 1.0)) {
    throw Error(ErrorKind::Contract, "target reward must lie in [0, 1]");
  }
  if (series_window.empty()) throw Error(ErrorKind::Shape, "empty series window");
}

// --- layout -----------------------------------------------------------------

struct PolicyValueNet::Layout {
  std::size_t A, d, h, K, W;
  std::size_t emb = 0, wx = 0, wh = 0, lb = 0;
  std::vector<std::size_t> conv_w, conv_b, conv_cin;
  std::vector<std::size_t> fc_w, fc_b, fc_in;
  std::size_t pol_w = 0, pol_b = 0, val_w = 0, val_b = 0, total = 0;

  explicit Layout(const NetConfig& c)
      : A(c.action_count), d(c.embedding_dim), h(c.hidden_dim), K(c.kernel_size),
        W(c.window_length) {
    std::size_t off = 0;
    auto take = [&](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    emb = take(A * d);
    wx = take(4 * h * d);
    wh = take(4 * h * h);
    lb = take(4 * h);
    for (std::size_t l = 0; l < c.tcn_levels; ++l) {
      const std::size_t cin = l == 0 ? 1 : h;
      conv_cin.push_back(cin);
      conv_w.push_back(take(h * cin * K));
      conv_b.push_back(take(h));
    }
    for (std::size_t j = 0; j < c.trunk_layers; ++j) {
      const std::size_t in = j == 0 ? 2 * h : h;
      fc_in.push_back(in);
      fc_w.push_back(take(h * in));
      fc_b.push_back(take(h));
    }
    pol_w = take(A * h);
    pol_b = take(A);
    val_w = take(h);
    val_b = take(1);
    total = off;
  }

  std::size_t trunk_out() const noexcept { return fc_in.empty() ? 2 * h : h; }
};

struct PolicyValueNet::Cache {
  std::vector<std::size_t> tokens;
  std::vector<double> gates;    // T x 4h, post-activation, order i f g o
  std::vector<double> cells;    // (T + 1) x h
  std::vector<double> hiddens;  // (T + 1) x h
  std::vector<std::vector<double>> conv;  // [0] input window, [l + 1] level l output
  std::vector<std::vector<double>> fc;    // [0] concatenated state, [j + 1] layer j output
  std::vector<double> prior;
  double value = 0.0;
};

// --- construction -----------------------------------------------------------

PolicyValueNet::PolicyValueNet(NetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const Layout L(cfg_);
  weights_.assign(L.total, 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t at, std::size_t n, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < n; ++i) weights_[at + i] = u(rng);
  };
  auto xavier = [](std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  fill(L.emb, L.A * L.d, 0.5);
  fill(L.wx, 4 * L.h * L.d, xavier(L.d, L.h));
  fill(L.wh, 4 * L.h * L.h, xavier(L.h, L.h));
  // Forget-gate bias starts at 1.
  for (std::size_t j = 0; j < L.h; ++j) weights_[L.lb + L.h + j] = 1.0;
  for (std::size_t l = 0; l < L.conv_w.size(); ++l) {
    fill(L.conv_w[l], L.h * L.conv_cin[l] * L.K, xavier(L.conv_cin[l] * L.K, L.h));
  }
  for (std::size_t j = 0; j < L.fc_w.size(); ++j) {
    fill(L.fc_w[j], L.h * L.fc_in[j], xavier(L.fc_in[j], L.h));
  }
}

PolicyValueNet::PolicyValueNet(NetConfig cfg, std::vector<double> weights)
    : cfg_(cfg), weights_(std::move(weights)) {}

std::pair<std::size_t, std::size_t> PolicyValueNet::policy_head_range() const noexcept {
  const Layout L(cfg_);
  return {L.pol_w, L.pol_b + L.A};
}

void PolicyValueNet::randomize(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& w : weights_) w = u(rng);
}

// --- forward ----------------------------------------------------------------

std::vector<double> PolicyValueNet::prepare_window(std::span<const double> series) const {
  if (series.empty()) throw Error(ErrorKind::Shape, "empty series passed to the network");
  const std::size_t W = cfg_.window_length;
  std::vector<double> x(W);
  if (series.size() >= W) {
    std::copy(series.end() - static_cast<std::ptrdiff_t>(W), series.end(), x.begin());
  } else {
    const std::size_t pad = W - series.size();
    std::fill(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(pad), series.front());
    std::copy(series.begin(), series.end(), x.begin() + static_cast<std::ptrdiff_t>(pad));
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(W);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(W));
  for (double& v : x) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return x;
}

void PolicyValueNet::encode_path(std::span<const Symbol> path, Cache* cache,
                                 std::vector<double>& hout) const {
  const Layout L(cfg_);
  const std::size_t h = L.h;
  const std::size_t T = path.size();
  const double* w = weights_.data();

  std::vector<double> c(h, 0.0), hs(h, 0.0), z(4 * h);
  if (cache) {
    cache->tokens.resize(T);
    cache->gates.assign(T * 4 * h, 0.0);
    cache->cells.assign((T + 1) * h, 0.0);
    cache->hiddens.assign((T + 1) * h, 0.0);
  }
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t tok = index_of(path[t]);
    if (tok >= L.A) {
      throw Error(ErrorKind::Vocabulary, "symbol '" + std::string(name(path[t])) +
                                             "' is outside the network vocabulary of " +
                                             std::to_string(L.A));
    }
    const double* e = w + L.emb + tok * L.d;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = w[L.lb + r];
      const double* wx = w + L.wx + r * L.d;
      for (std::size_t k = 0; k < L.d; ++k) acc += wx[k] * e[k];
      const double* wh = w + L.wh + r * h;
      for (std::size_t k = 0; k < h; ++k) acc += wh[k] * hs[k];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[h + j]);
      const double gg = std::tanh(z[2 * h + j]);
      const double og = sigmoid(z[3 * h + j]);
      c[j] = fg * c[j] + ig * gg;
      z[j] = ig;
      z[h + j] = fg;
      z[2 * h + j] = gg;
      z[3 * h + j] = og;
    }
    for (std::size_t j = 0; j < h; ++j) hs[j] = z[3 * h + j] * std::tanh(c[j]);
    if (cache) {
      cache->tokens[t] = tok;
      std::copy(z.begin(), z.end(), cache->gates.begin() + static_cast<std::ptrdiff_t>(t * 4 * h));
      std::copy(c.begin(), c.end(), cache->cells.begin() + static_cast<std::ptrdiff_t>((t + 1) * h));
      std::copy(hs.begin(), hs.end(), cache->hiddens.begin() + static_cast<std::ptrdiff_t>((t + 1) * h));
    }
  }
  hout = std::move(hs);
}

void PolicyValueNet::encode_series_into(std::span<const double> series, Cache* cache,
                                        std::vector<double>& state) const {
  const Layout L(cfg_);
  const std::size_t h = L.h;
  const std::size_t W = L.W;
  const double* w = weights_.data();

  std::vector<double> x = prepare_window(series);
  if (cache) {
    cache->conv.clear();
    cache->conv.push_back(x);
  }
  std::size_t dil = 1;
  for (std::size_t l = 0; l < L.conv_w.size(); ++l) {
    const std::size_t cin = L.conv_cin[l];
    std::vector<double> y(h * W);
    for (std::size_t c = 0; c < h; ++c) {
      for (std::size_t tau = 0; tau < W; ++tau) {
        double acc = w[L.conv_b[l] + c];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* wk = w + L.conv_w[l] + (c * cin + ci) * L.K;
          for (std::size_t k = 0; k < L.K && k * dil <= tau; ++k) {
            acc += wk[k] * x[ci * W + tau - k * dil];
          }
        }
        y[c * W + tau] = std::tanh(acc);
      }
    }
    x = std::move(y);
    if (cache) cache->conv.push_back(x);
    dil *= 2;
  }
  state.resize(h);
  for (std::size_t c = 0; c < h; ++c) state[c] = x[c * W + (W - 1)];
}

NetOutput PolicyValueNet::heads(const std::vector<double>& path_state,
                                const std::vector<double>& series_state, Cache* cache) const {
  const Layout L(cfg_);
  const double* w = weights_.data();
  std::vector<double> u(path_state);
  u.insert(u.end(), series_state.begin(), series_state.end());
  if (cache) {
    cache->fc.clear();
    cache->fc.push_back(u);
  }
  for (std::size_t j = 0; j < L.fc_w.size(); ++j) {
    std::vector<double> v(L.h);
    for (std::size_t r = 0; r < L.h; ++r) {
      double acc = w[L.fc_b[j] + r];
      const double* row = w + L.fc_w[j] + r * L.fc_in[j];
      for (std::size_t k = 0; k < L.fc_in[j]; ++k) acc += row[k] * u[k];
      v[r] = std::tanh(acc);
    }
    u = std::move(v);
    if (cache) cache->fc.push_back(u);
  }
  const std::size_t n = u.size();
  std::vector<double> logits(L.A);
  for (std::size_t a = 0; a < L.A; ++a) {
    double acc = w[L.pol_b + a];
    const double* row = w + L.pol_w + a * n;
    for (std::size_t k = 0; k < n; ++k) acc += row[k] * u[k];
    logits[a] = acc;
  }
  double vpre = w[L.val_b];
  for (std::size_t k = 0; k < n; ++k) vpre += w[L.val_w + k] * u[k];

  NetOutput out;
  softmax(logits, out.prior);
  // Keep the value strictly inside (0, 1) even when the logistic saturates.
  out.value = std::clamp(sigmoid(vpre), 1e-15, 1.0 - 1e-15);
  if (cache) {
    cache->prior = out.prior;
    cache->value = sigmoid(vpre);
  }
  return out;
}

SeriesEncoding PolicyValueNet::encode_series(std::span<const double> series) const {
  SeriesEncoding enc;
  encode_series_into(series, nullptr, enc.state);
  return enc;
}

NetOutput PolicyValueNet::forward(std::span<const Symbol> path,
                                  const SeriesEncoding& series) const {
  if (series.state.size() != cfg_.hidden_dim) {
    throw Error(ErrorKind::Shape, "series encoding does not match the network width");
  }
  std::vector<double> hpath;
  encode_path(path, nullptr, hpath);
  return heads(hpath, series.state, nullptr);
}

NetOutput PolicyValueNet::forward(std::span<const Symbol> path,
                                  std::span<const double> series) const {
  return forward(path, encode_series(series));
}

// --- backward ---------------------------------------------------------------

void PolicyValueNet::backward(const Cache& cache, std::span<const double> dlogits,
                              double dvalue_pre, std::vector<double>& grad) const {
  const Layout L(cfg_);
  const std::size_t h = L.h;
  const std::size_t W = L.W;
  const double* w = weights_.data();
  double* g = grad.data();

  // Output heads.
  const std::vector<double>& top = cache.fc.back();
  const std::size_t n = top.size();
  std::vector<double> du(n, 0.0);
  for (std::size_t a = 0; a < L.A; ++a) {
    const double ga = dlogits[a];
    if (ga == 0.0) continue;
    g[L.pol_b + a] += ga;
    for (std::size_t k = 0; k < n; ++k) {
      g[L.pol_w + a * n + k] += ga * top[k];
      du[k] += w[L.pol_w + a * n + k] * ga;
    }
  }
  g[L.val_b] += dvalue_pre;
  for (std::size_t k = 0; k < n; ++k) {
    g[L.val_w + k] += dvalue_pre * top[k];
    du[k] += w[L.val_w + k] * dvalue_pre;
  }

  // Trunk.
  for (std::size_t j = L.fc_w.size(); j-- > 0;) {
    const std::vector<double>& out = cache.fc[j + 1];
    const std::vector<double>& in = cache.fc[j];
    const std::size_t nin = L.fc_in[j];
    std::vector<double> din(nin, 0.0);
    for (std::size_t r = 0; r < h; ++r) {
      const double dp = du[r] * (1.0 - out[r] * out[r]);
      g[L.fc_b[j] + r] += dp;
      for (std::size_t k = 0; k < nin; ++k) {
        g[L.fc_w[j] + r * nin + k] += dp * in[k];
        din[k] += w[L.fc_w[j] + r * nin + k] * dp;
      }
    }
    du = std::move(din);
  }

  // Series encoder: only the last time step of the top level feeds the trunk.
  {
    std::vector<double> dy(h * W, 0.0);
    for (std::size_t c = 0; c < h; ++c) dy[c * W + (W - 1)] = du[h + c];
    for (std::size_t l = L.conv_w.size(); l-- > 0;) {
      const std::size_t dil = std::size_t{1} << l;
      const std::size_t cin = L.conv_cin[l];
      const std::vector<double>& y = cache.conv[l + 1];
      const std::vector<double>& x = cache.conv[l];
      std::vector<double> dx(l > 0 ? cin * W : 0, 0.0);
      for (std::size_t c = 0; c < h; ++c) {
        for (std::size_t tau = 0; tau < W; ++tau) {
          const double yv = y[c * W + tau];
          const double dp = dy[c * W + tau] * (1.0 - yv * yv);
          if (dp == 0.0) continue;
          g[L.conv_b[l] + c] += dp;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::size_t wk = L.conv_w[l] + (c * cin + ci) * L.K;
            for (std::size_t k = 0; k < L.K && k * dil <= tau; ++k) {
              const std::size_t src = ci * W + tau - k * dil;
              g[wk + k] += dp * x[src];
              if (l > 0) dx[src] += w[wk + k] * dp;
            }
          }
        }
      }
      dy = std::move(dx);
    }
  }

  // Path encoder, backpropagation through time.
  const std::size_t T = cache.tokens.size();
  std::vector<double> dh(du.begin(), du.begin() + static_cast<std::ptrdiff_t>(h));
  std::vector<double> dc(h, 0.0), dz(4 * h), dh_prev(h);
  for (std::size_t t = T; t-- > 0;) {
    const double* gates = cache.gates.data() + t * 4 * h;
    const double* c_t = cache.cells.data() + (t + 1) * h;
    const double* c_prev = cache.cells.data() + t * h;
    const double* h_prev = cache.hiddens.data() + t * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = gates[j];
      const double fg = gates[h + j];
      const double gg = gates[2 * h + j];
      const double og = gates[3 * h + j];
      const double tc = std::tanh(c_t[j]);
      const double d_o = dh[j] * tc;
      const double d_c = dc[j] + dh[j] * og * (1.0 - tc * tc);
      dz[j] = d_c * gg * ig * (1.0 - ig);
      dz[h + j] = d_c * c_prev[j] * fg * (1.0 - fg);
      dz[2 * h + j] = d_c * ig * (1.0 - gg * gg);
      dz[3 * h + j] = d_o * og * (1.0 - og);
      dc[j] = d_c * fg;
    }
    const std::size_t tok = cache.tokens[t];
    const double* e = w + L.emb + tok * L.d;
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double dr = dz[r];
      if (dr == 0.0) continue;
      g[L.lb + r] += dr;
      for (std::size_t k = 0; k < L.d; ++k) {
        g[L.wx + r * L.d + k] += dr * e[k];
        g[L.emb + tok * L.d + k] += w[L.wx + r * L.d + k] * dr;
      }
      for (std::size_t k = 0; k < h; ++k) {
        g[L.wh + r * h + k] += dr * h_prev[k];
        dh_prev[k] += w[L.wh + r * h + k] * dr;
      }
    }
    std::swap(dh, dh_prev);
  }
}

TrainStepResult PolicyValueNet::loss_and_gradient(std::span<const TrainingExample> batch,
                                                  const TrainConfig& cfg,
                                                  std::vector<double>& grad) const {
  if (batch.empty()) throw Error(ErrorKind::Contract, "training batch is empty");
  grad.assign(weights_.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  TrainStepResult out;
  std::vector<double> dlogits(cfg_.action_count);
  Cache cache;
  for (const auto& ex : batch) {
    ex.validate(cfg_.action_count);
    std::vector<double> hpath, hseries;
    encode_path(ex.path_tokens, &cache, hpath);
    encode_series_into(ex.series_window, &cache, hseries);
    heads(hpath, hseries, &cache);

    const double lps = policy_loss_grad(cache.prior, ex.target_policy, cfg.policy_direction, dlogits);
    const double v = cache.value;
    const double lre = (v - ex.target_reward) * (v - ex.target_reward);
    out.loss_ps += lps * inv;
    out.loss_re += lre * inv;
    for (double& d : dlogits) d *= cfg.theta1 * inv;
    const double dv = cfg.theta2 * inv * 2.0 * (v - ex.target_reward) * v * (1.0 - v);
    backward(cache, dlogits, dv, grad);
  }
  out.loss_total = cfg.theta1 * out.loss_ps + cfg.theta2 * out.loss_re;
  return out;
}

// --- persistence ------------------------------------------------------------

void PolicyValueNet::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write weights file " + file.string());
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(cfg_.action_count));
  put_u32(out, static_cast<std::uint32_t>(cfg_.embedding_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg_.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg_.trunk_layers));
  put_u32(out, static_cast<std::uint32_t>(cfg_.tcn_levels));
  put_u32(out, static_cast<std::uint32_t>(cfg_.kernel_size));
  put_u32(out, static_cast<std::uint32_t>(cfg_.window_length));
  put_u64(out, weights_.size());
  for (double v : weights_) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing weights file " + file.string());
}

PolicyValueNet PolicyValueNet::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read weights file " + file.string());
  const std::string fname = file.string();
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || magic != kMagic) {
    throw Error(ErrorKind::Format, "not a symts weights file: " + fname);
  }
  const auto version = get_le(in, 4, fname);
  if (version != kFormatVersion) {
    throw Error(ErrorKind::Format, "unsupported weights format version " + std::to_string(version));
  }
  NetConfig cfg;
  cfg.action_count = get_le(in, 4, fname);
  cfg.embedding_dim = get_le(in, 4, fname);
  cfg.hidden_dim = get_le(in, 4, fname);
  cfg.trunk_layers = get_le(in, 4, fname);
  cfg.tcn_levels = get_le(in, 4, fname);
  cfg.kernel_size = get_le(in, 4, fname);
  cfg.window_length = get_le(in, 4, fname);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, std::string("invalid architecture in weights file: ") + e.what());
  }
  const std::uint64_t count = get_le(in, 8, fname);
  if (count != Layout(cfg).total) {
    throw Error(ErrorKind::Format, "weights file parameter count does not match its architecture");
  }
  std::vector<double> weights(count);
  for (double& v : weights) {
    const std::uint64_t bits = get_le(in, 8, fname);
    std::memcpy(&v, &bits, sizeof v);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::Format, "trailing bytes in weights file " + fname);
  }
  return PolicyValueNet(cfg, std::move(weights));
}

// --- free functions ---------------------------------------------------------

double loss_policy(std::span<const double> prior, std::span<const double> target,
                   PolicyLossDirection direction) {
  if (prior.size() != target.size()) {
    throw Error(ErrorKind::Shape, "policy loss inputs have different supports");
  }
  return policy_loss_grad(prior, target, direction, {});
}

double loss_value(double estimate, double simulated) {
  return (estimate - simulated) * (estimate - simulated);
}

TrainStepResult train_step(PolicyValueNet& net, std::span<const TrainingExample> batch,
                           const TrainConfig& cfg) {
  cfg.validate();
  std::vector<double> grad;
  const TrainStepResult res = net.loss_and_gradient(batch, cfg, grad);
  if (!std::isfinite(res.loss_total)) {
    throw Error(ErrorKind::TrainingDivergence, "non-finite training loss");
  }
  double scale = cfg.learning_rate;
  if (cfg.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (double gi : grad) sq += gi * gi;
    const double norm = std::sqrt(sq);
    if (norm > cfg.max_grad_norm) scale *= cfg.max_grad_norm / norm;
  }
  auto w = net.weights();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * grad[i];
  return res;
}

void save_weights(const PolicyValueNet& net, const std::filesystem::path& file) { net.save(file); }

PolicyValueNet load_weights(const std::filesystem::path& file) { return PolicyValueNet::load(file); }

PolicyValueNet load_weights(const std::filesystem::path& file, const NetConfig& expected) {
  PolicyValueNet net = PolicyValueNet::load(file);
  if (!(net.config() == expected)) {
    throw Error(ErrorKind::Format, "weights file architecture does not match the configuration");
  }
  return net;
}

}  // namespace symts
