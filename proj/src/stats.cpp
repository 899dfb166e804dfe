#include "martkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "martkit/error.hpp"

namespace martkit {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), ErrorKind::InvalidArgument, "quantile of an empty sample");
    require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidArgument, "quantile level must lie in [0, 1]");
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double mean(const std::vector<double>& values) {
    require(!values.empty(), ErrorKind::InvalidArgument, "mean of an empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
    require(values.size() >= 2, ErrorKind::InvalidArgument,
            "standard deviation needs at least two values");
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace martkit
