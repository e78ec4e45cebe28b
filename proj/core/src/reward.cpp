#include "symts/reward.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "symts/error.hpp"

namespace symts {

void RewardConfig::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorKind::Configuration, "eta must lie strictly inside (0, 1)");
  }
}

double total_absolute_error(const ExpressionTree& tree, std::span<const double> coeffs,
                            const TimeSeries& series) {
  std::vector<double> pred(series.size());
  tree.evaluate(coeffs, series.timestamps(), pred);
  auto values = series.values();
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i])) return std::numeric_limits<double>::infinity();
    err += std::abs(values[i] - pred[i]);
  }
  return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
}

double reward_from_error(double abs_error, std::size_t size, const RewardConfig& cfg) {
  if (!std::isfinite(abs_error) || abs_error < 0.0) return 0.0;
  return std::pow(cfg.eta, static_cast<double>(size)) / (1.0 + abs_error);
}

double reward(const TimeSeries& series, const ExpressionTree& tree,
              std::span<const double> coeffs, const RewardConfig& cfg) {
  return reward_from_error(total_absolute_error(tree, coeffs, series), tree.size(), cfg);
}

}  // namespace symts
