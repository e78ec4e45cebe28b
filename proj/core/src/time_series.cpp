#include "symts/time_series.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "symts/error.hpp"

namespace symts {

TimeSeries::TimeSeries(std::vector<double> timestamps, std::vector<double> values)
    : timestamps_(std::move(timestamps)), values_(std::move(values)) {
  if (timestamps_.size() != values_.size()) {
    throw Error(ErrorKind::Shape, "timestamp and value counts differ");
  }
  if (values_.size() < 2) {
    throw Error(ErrorKind::InsufficientData, "a time series needs at least 2 points");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(timestamps_[i]) || !std::isfinite(values_[i])) {
      throw Error(ErrorKind::Contract, "non-finite entry at index " + std::to_string(i));
    }
    if (i > 0 && !(timestamps_[i] > timestamps_[i - 1])) {
      throw Error(ErrorKind::Ordering,
                  "timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

TimeSeries TimeSeries::from_values(std::vector<double> values) {
  std::vector<double> ts(values.size());
  std::iota(ts.begin(), ts.end(), 0.0);
  return TimeSeries(std::move(ts), std::move(values));
}

TimeSeries TimeSeries::slice(std::size_t offset, std::size_t length, bool reindex) const {
  if (offset + length > size()) {
    throw Error(ErrorKind::InsufficientData, "slice [" + std::to_string(offset) + ", " +
                                                 std::to_string(offset + length) +
                                                 ") exceeds series length " +
                                                 std::to_string(size()));
  }
  std::vector<double> ts(timestamps_.begin() + static_cast<std::ptrdiff_t>(offset),
                         timestamps_.begin() + static_cast<std::ptrdiff_t>(offset + length));
  std::vector<double> vs(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                         values_.begin() + static_cast<std::ptrdiff_t>(offset + length));
  if (reindex) std::iota(ts.begin(), ts.end(), 0.0);
  return TimeSeries(std::move(ts), std::move(vs));
}

TimeSeries TimeSeries::reindexed() const { return slice(0, size(), true); }

TimeSeries TimeSeries::standardized() const {
  const double n = static_cast<double>(size());
  const double mean = std::accumulate(values_.begin(), values_.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values_) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> vs(values_.size());
  for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = sd > 0.0 ? (values_[i] - mean) / sd : 0.0;
  return TimeSeries(timestamps_, std::move(vs));
}

}  // namespace symts
