#include "symts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "symts/error.hpp"

namespace symts {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "metric inputs differ in length");
  if (a.size() < 2) throw Error(ErrorKind::Shape, "metrics need at least 2 points");
}

bool is_constant(std::span<const double> v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double r_squared(std::span<const double> predicted, std::span<const double> actual) {
  check_pair(predicted, actual);
  if (is_constant(actual)) {
    throw Error(ErrorKind::UndefinedVariance, "R^2 is undefined for a constant target");
  }
  const double mean = mean_of(actual);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = actual[i] - predicted[i];
    const double d = actual[i] - mean;
    ss_res += r * r;
    ss_tot += d * d;
  }
  return 1.0 - ss_res / ss_tot;
}

double corr(std::span<const double> predicted, std::span<const double> actual) {
  check_pair(predicted, actual);
  if (is_constant(predicted) || is_constant(actual)) {
    throw Error(ErrorKind::UndefinedVariance, "correlation is undefined for constant input");
  }
  const double mp = mean_of(predicted);
  const double ma = mean_of(actual);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double dx = predicted[i] - mp;
    const double dy = actual[i] - ma;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double atc(std::chrono::duration<double> total_elapsed, std::size_t n_samples) {
  if (n_samples == 0) throw Error(ErrorKind::Contract, "ATC needs at least one sample");
  return total_elapsed.count() / static_cast<double>(n_samples);
}

}  // namespace symts
