#pragma once

#include <vector>

namespace martkit {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Type-7 quantile of an unsorted sample.
double quantile(std::vector<double> values, double p);

double median(std::vector<double> values);

double mean(const std::vector<double>& values);

/// Unbiased sample standard deviation (n - 1 divisor).
double sample_sd(const std::vector<double>& values);

}  // namespace martkit
