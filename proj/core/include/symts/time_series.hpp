#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace symts {

/// Timestamped univariate series. Timestamps are strictly increasing and the
/// series holds at least two finite points.
class TimeSeries {
 public:
  TimeSeries(std::vector<double> timestamps, std::vector<double> values);

  /// Timestamps 0, 1, 2, ...
  static TimeSeries from_values(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> timestamps() const noexcept { return timestamps_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Contiguous sub-range; with `reindex` the timestamps restart at 0.
  TimeSeries slice(std::size_t offset, std::size_t length, bool reindex) const;
  TimeSeries reindexed() const;
  /// Values minus their mean, divided by their standard deviation.
  TimeSeries standardized() const;

 private:
  std::vector<double> timestamps_;
  std::vector<double> values_;
};

}  // namespace symts
