#pragma once

#include <chrono>
#include <cstddef>
#include <span>

namespace symts {

/// Coefficient of determination, 1 - SS_res / SS_tot. Negative when the
/// prediction is worse than the mean of `actual`. Throws when `actual` is
/// constant.
double r_squared(std::span<const double> predicted, std::span<const double> actual);

/// Pearson correlation. Throws when either input has zero variance.
double corr(std::span<const double> predicted, std::span<const double> actual);

/// Average time cost per sample, in seconds.
double atc(std::chrono::duration<double> total_elapsed, std::size_t n_samples);

}  // namespace symts
