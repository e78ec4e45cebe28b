#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "symts/error.hpp"
#include "symts/expr.hpp"
#include "symts/optimizer.hpp"

namespace symts {
namespace {

using testing::make_series;

TEST(Powell, OneDimensionalQuadratic) {
  const auto r = powell_minimize([](std::span<const double> x) { return (x[0] - 2) * (x[0] - 2); },
                                 {0.0}, OptimizerConfig{});
  EXPECT_NEAR(r.x[0], 2.0, 1e-6);
}

TEST(Powell, AnisotropicQuadratic) {
  const auto r = powell_minimize(
      [](std::span<const double> x) { return x[0] * x[0] + 10 * x[1] * x[1]; }, {3.0, 3.0},
      OptimizerConfig{});
  EXPECT_NEAR(r.x[0], 0.0, 1e-6);
  EXPECT_NEAR(r.x[1], 0.0, 1e-6);
}

TEST(Powell, Rosenbrock) {
  OptimizerConfig cfg;
  cfg.max_outer_iters = 1000;
  cfg.f_tol = 1e-14;
  cfg.line_search_tol = 1e-10;
  const auto r = powell_minimize(
      [](std::span<const double> x) {
        return (1 - x[0]) * (1 - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
      },
      {-1.2, 1.0}, cfg);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(Powell, NeverWorseThanStart) {
  const auto f = [](std::span<const double> x) { return std::abs(std::sin(3 * x[0])) + x[1] * x[1]; };
  const std::vector<double> x0{0.4, -0.7};
  const auto r = powell_minimize(f, x0, OptimizerConfig{});
  EXPECT_LE(r.f, f(x0));
}

TEST(Powell, ZeroDimensions) {
  try {
    powell_minimize([](std::span<const double>) { return 0.0; }, {}, OptimizerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyProblem);
  }
}

TEST(Powell, ConfigValidation) {
  OptimizerConfig cfg;
  cfg.max_outer_iters = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.f_tol = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(LineMinimize, Quadratic) {
  const auto m = line_minimize([](double a) { return (a - 1) * (a - 1); }, 1.0, 1e-8);
  EXPECT_NEAR(m.step, 1.0, 1e-6);
}

TEST(LineMinimize, MonotoneIncreasingStaysPut) {
  const auto m = line_minimize([](double a) { return std::exp(a); }, 1.0, 1e-8);
  EXPECT_EQ(m.step, 0.0);
}

TEST(LineMinimize, CosineFindsPi) {
  const auto m = line_minimize([](double a) { return std::cos(a); }, 0.5, 1e-8);
  EXPECT_NEAR(m.step, std::numbers::pi, 1e-6);
}

TEST(FitCoefficients, ExactLinear) {
  const TimeSeries s = make_series(20, [](double t) { return 2 * t; });
  const auto fit = fit_coefficients(to_tree(parse_prefix("mul C t")), s, OptimizerConfig{});
  EXPECT_NEAR(fit.coeffs[0], 2.0, 1e-4);
  EXPECT_NEAR(fit.abs_error, 0.0, 1e-4);
}

TEST(FitCoefficients, ConstantIsL1Median) {
  const TimeSeries s = make_series(3, [](double t) { return t + 1; });
  const auto fit = fit_coefficients(to_tree(parse_prefix("C")), s, OptimizerConfig{});
  // Brute-force scan of the L1 objective.
  double best = 0.0;
  double best_err = 1e300;
  for (int i = 0; i <= 40000; ++i) {
    const double c = i * 1e-4;
    const double err = std::abs(1 - c) + std::abs(2 - c) + std::abs(3 - c);
    if (err < best_err) {
      best_err = err;
      best = c;
    }
  }
  EXPECT_NEAR(fit.coeffs[0], best, 1e-3);
  EXPECT_NEAR(fit.coeffs[0], 2.0, 1e-3);
}

TEST(FitCoefficients, ZeroSlotTree) {
  const TimeSeries s = make_series(15, [](double t) { return std::sin(t); });
  const auto fit = fit_coefficients(to_tree(parse_prefix("sin t")), s, OptimizerConfig{});
  EXPECT_TRUE(fit.coeffs.empty());
  EXPECT_NEAR(fit.abs_error, 0.0, 1e-12);
}

TEST(FitCoefficients, Deterministic) {
  const TimeSeries s = make_series(25, [](double t) { return 1.5 * std::sin(0.7 * t) + 0.2 * t; });
  const ExpressionTree tree = to_tree(parse_prefix("add mul C sin mul C t mul C t"));
  OptimizerConfig cfg;
  cfg.seed = 99;
  const auto a = fit_coefficients(tree, s, cfg);
  const auto b = fit_coefficients(tree, s, cfg);
  EXPECT_EQ(a.coeffs, b.coeffs);
  EXPECT_EQ(a.abs_error, b.abs_error);
}

TEST(FitCoefficients, NonFiniteRegionsAreAvoided) {
  const TimeSeries s = make_series(10, [](double t) { return std::log(t + 2.0); });
  const auto fit = fit_coefficients(to_tree(parse_prefix("log add t C")), s, OptimizerConfig{});
  EXPECT_TRUE(std::isfinite(fit.abs_error));
  EXPECT_NEAR(fit.coeffs[0], 2.0, 1e-3);
}

}  // namespace
}  // namespace symts
