#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "symts/error.hpp"
#include "symts/expr.hpp"
#include "symts/metrics.hpp"
#include "symts/random.hpp"
#include "symts/reward.hpp"
#include "symts/time_series.hpp"

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

TEST(Reward, PerfectFitSizeThree) {
  const TimeSeries s = make_series(10, [](double t) { return t + 0.5; });
  const std::vector<double> c{0.5};
  EXPECT_NEAR(reward(s, to_tree(parse_prefix("add t C")), c, RewardConfig{}), 0.970299, 1e-12);
}

TEST(Reward, ErrorNineSizeOne) {
  EXPECT_NEAR(reward_from_error(9.0, 1, RewardConfig{}), 0.099, 1e-15);
  // Three points each off by 3 against the bare variable.
  const TimeSeries s = make_series(3, [](double t) { return t + 3.0; });
  EXPECT_NEAR(reward(s, to_tree(parse_prefix("t")), {}, RewardConfig{}), 0.099, 1e-15);
}

TEST(Reward, NonFiniteIsZero) {
  const TimeSeries s = make_series(5, [](double t) { return t; });
  EXPECT_EQ(reward(s, to_tree(parse_prefix("log t")), {}, RewardConfig{}), 0.0);
  EXPECT_EQ(reward_from_error(std::numeric_limits<double>::infinity(), 3, RewardConfig{}), 0.0);
}

TEST(Reward, EtaValidation) {
  for (double eta : {0.0, 1.0, -0.5, 1.5}) {
    RewardConfig cfg{eta};
    EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::Configuration) << eta;
  }
}

TEST(Reward, Monotone) {
  const RewardConfig cfg;
  double prev = 2.0;
  for (double err = 0.0; err < 50.0; err += 0.25) {
    const double r = reward_from_error(err, 4, cfg);
    EXPECT_LT(r, prev);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    prev = r;
  }
  prev = 2.0;
  for (std::size_t s = 1; s < 40; ++s) {
    const double r = reward_from_error(1.5, s, cfg);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Reward, MatchesOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const ExpressionPath p = testing::random_path(rng, 12);
    const ExpressionTree tree = to_tree(p);
    std::vector<double> coeffs(tree.coefficient_count());
    for (double& c : coeffs) c = uniform_unit(rng) * 3.0 - 1.5;
    const TimeSeries s = make_series(20, [&](double t) { return std::sin(0.4 * t) + 0.1 * t; }, 1.0);
    const double a = reward(s, tree, coeffs, RewardConfig{0.97});
    const double b = testing::reward_oracle(p.tokens(), coeffs, s, 0.97);
    EXPECT_NEAR(a, b, 1e-12) << p.to_prefix();
  }
}

TEST(RSquared, Examples) {
  const std::vector<double> a{0, 1, 2};
  EXPECT_DOUBLE_EQ(r_squared(a, a), 1.0);
  const std::vector<double> mean{1, 1, 1};
  EXPECT_DOUBLE_EQ(r_squared(mean, a), 0.0);
  const std::vector<double> zero{0, 0, 0};
  EXPECT_DOUBLE_EQ(r_squared(zero, a), -1.5);
}

TEST(RSquared, ConstantActualIsUndefined) {
  const std::vector<double> a{2, 2, 2};
  const std::vector<double> p{1, 2, 3};
  EXPECT_EQ(kind_of([&] { r_squared(p, a); }), ErrorKind::UndefinedVariance);
}

TEST(Corr, Examples) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_DOUBLE_EQ(corr(a, a), 1.0);
  const std::vector<double> neg{-1, -2, -3};
  EXPECT_DOUBLE_EQ(corr(neg, a), -1.0);
  const std::vector<double> p{1, 2, 4};
  EXPECT_NEAR(corr(p, a), 0.9820, 5e-5);
  const std::vector<double> flat{4, 4, 4};
  EXPECT_EQ(kind_of([&] { corr(flat, a); }), ErrorKind::UndefinedVariance);
}

TEST(Metrics, ShapeMismatch) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 2};
  EXPECT_EQ(kind_of([&] { r_squared(b, a); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([&] { corr(b, a); }), ErrorKind::Shape);
}

TEST(Metrics, MatchOracles) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    std::vector<double> a(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = uniform_unit(rng) * 10.0 - 5.0;
      p[i] = a[i] + (uniform_unit(rng) - 0.5) * 8.0 * uniform_unit(rng);
    }
    EXPECT_NEAR(r_squared(p, a), testing::r2_oracle(p, a), 1e-12);
    EXPECT_NEAR(corr(p, a), testing::corr_oracle(p, a), 1e-12);
  }
}

TEST(Metrics, CorrAffineInvariant) {
  Rng rng(41);
  std::vector<double> a(25), p(25), q(25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = uniform_unit(rng);
    p[i] = a[i] + 0.3 * uniform_unit(rng);
    q[i] = 3.5 * p[i] - 7.0;
  }
  EXPECT_NEAR(corr(p, a), corr(q, a), 1e-12);
}

TEST(Atc, Examples) {
  EXPECT_DOUBLE_EQ(atc(std::chrono::duration<double>(60.0), 2), 30.0);
  EXPECT_DOUBLE_EQ(atc(std::chrono::duration<double>(0.0), 5), 0.0);
  EXPECT_EQ(kind_of([] { atc(std::chrono::duration<double>(1.0), 0); }), ErrorKind::Contract);
}

TEST(TimeSeries, Validation) {
  EXPECT_EQ(kind_of([] { TimeSeries({0.0}, {1.0}); }), ErrorKind::InsufficientData);
  EXPECT_EQ(kind_of([] { TimeSeries({0.0, 1.0}, {1.0}); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([] { TimeSeries({0.0, 0.0}, {1.0, 2.0}); }), ErrorKind::Ordering);
  EXPECT_EQ(kind_of([] { TimeSeries({0.0, 1.0}, {1.0, NAN}); }), ErrorKind::Contract);
}

TEST(TimeSeries, SliceAndStandardize) {
  const TimeSeries s = make_series(10, [](double t) { return 2.0 * t; }, 5.0);
  const TimeSeries w = s.slice(2, 4, true);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w.timestamps()[0], 0.0);
  EXPECT_EQ(w.values()[0], 14.0);
  const TimeSeries z = s.standardized();
  double m = 0.0;
  for (double v : z.values()) m += v;
  EXPECT_NEAR(m, 0.0, 1e-12);
}

}  // namespace
}  // namespace symts
