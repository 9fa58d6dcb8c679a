#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nullaudit::stats {

// Inverse-CDF (type-1) quantile: smallest order statistic x_(k) with k/n >= q.
inline double quantile_type1_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double n = static_cast<double>(sorted.size());
    auto k = static_cast<std::ptrdiff_t>(std::ceil(q * n)) - 1;
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
    return sorted[static_cast<std::size_t>(k)];
}

inline double quantile_type1(std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    return quantile_type1_sorted(x, q);
}

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return std::nan("");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Midpoint median for even sizes.
inline double median(std::vector<double> x) {
    if (x.empty()) return std::nan("");
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double sd(const std::vector<double>& x) {
    if (x.size() < 2) return std::nan("");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline double sd(const double* x, std::size_t n) {
    if (n < 2) return std::nan("");
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i];
    m /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - m) * (x[i] - m);
    return std::sqrt(s / static_cast<double>(n - 1));
}

}  // namespace nullaudit::stats
