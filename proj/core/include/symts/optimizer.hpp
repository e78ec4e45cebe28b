#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "symts/expr.hpp"
#include "symts/time_series.hpp"

namespace symts {

struct OptimizerConfig {
  int max_outer_iters = 100;
  /// Relative decrease per outer iteration below which Powell stops.
  double f_tol = 1e-10;
  double line_search_tol = 1e-8;
  /// Extra Powell starts after the all-ones start.
  int n_restarts = 2;
  /// Random starts are drawn uniformly from [-init_scale, init_scale].
  double init_scale = 2.0;
  /// Candidates screened per random start; the best one seeds Powell.
  int screen_samples = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

using Objective = std::function<double(std::span<const double>)>;

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  std::size_t evaluations = 0;
};

/// Powell's direction-set method. Starts from the coordinate axes, minimizes
/// along each direction in turn, and swaps the direction of largest decrease
/// for the net displacement of the sweep. Non-finite objective values count
/// as +inf. The returned value never exceeds objective(x0).
MinimizeResult powell_minimize(const Objective& objective, std::vector<double> x0,
                               const OptimizerConfig& cfg);

struct LineMinimum {
  double step = 0.0;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// One-dimensional minimization starting at step 0. The bracket grows by
/// doubling from `hint` (at most 50 times), then Brent's method refines it to
/// `tol`. Returns step 0 when no bracket is found or nothing improves.
LineMinimum line_minimize(const std::function<double(double)>& g, double hint, double tol);

struct CoefficientFit {
  std::vector<double> coeffs;
  double abs_error = 0.0;
};

/// Minimizes sum_i |v_i - f(t_i)| over the tree's coefficients using
/// 1 + n_restarts Powell starts. Trees without coefficients are evaluated
/// as-is.
CoefficientFit fit_coefficients(const ExpressionTree& tree, const TimeSeries& series,
                                const OptimizerConfig& cfg);

}  // namespace symts
