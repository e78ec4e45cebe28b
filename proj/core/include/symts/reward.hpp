#pragma once

#include <cstddef>
#include <span>

#include "symts/expr.hpp"
#include "symts/time_series.hpp"

namespace symts {

struct RewardConfig {
  /// Per-node parsimony factor, strictly inside (0, 1).
  double eta = 0.99;

  void validate() const;
};

/// Sum of |v_i - f(t_i)|; +inf when any prediction is non-finite.
double total_absolute_error(const ExpressionTree& tree, std::span<const double> coeffs,
                            const TimeSeries& series);

/// eta^size / (1 + abs_error), or 0 when the error is not finite.
double reward_from_error(double abs_error, std::size_t size, const RewardConfig& cfg);

/// Parsimony-weighted fit reward in [0, 1]:
///
///   R = eta^s / (1 + sum_i |v_i - f(t_i)|)
///
/// with s the node count of `tree`. The error term is the absolute-error sum,
/// not RMSE. Any non-finite prediction yields 0.
double reward(const TimeSeries& series, const ExpressionTree& tree,
              std::span<const double> coeffs, const RewardConfig& cfg);

}  // namespace symts
