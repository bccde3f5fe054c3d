#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lexcurate/error.hpp"

namespace lexcurate::stats {

/// Quantile with linear interpolation between order statistics (Hyndman-Fan type 7,
/// the numpy default). `q` in [0, 1]. Takes its input by value because it sorts.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

inline double interquartile_range(const std::vector<double>& values) {
    return quantile(values, 0.75) - quantile(values, 0.25);
}

inline double mean(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("mean of an empty sample");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace lexcurate::stats
