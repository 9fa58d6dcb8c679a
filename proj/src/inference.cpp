#include "nullaudit/inference.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nullaudit/errors.hpp"
#include "nullaudit/simd.hpp"

namespace nullaudit::inference {

namespace {

constexpr int kMaxBandwidth = 64;

HacVariance hac_core(const double* y, std::size_t n, int L, double* scratch) {
    HacVariance h;
    h.bandwidth = L;
    const double nn = static_cast<double>(n);
    h.mean = simd::sum(y, n) / nn;

    double gam[kMaxBandwidth + 1];
    simd::autocov(y, n, h.mean, L, gam, scratch);
    h.second_moment = simd::dot(y, y, n) / nn;

    double lrv = gam[0];
    for (int l = 1; l <= L; ++l) lrv += 2.0 * bartlett_weight(l, L) * gam[l];
    lrv /= nn;  // long-run variance, divisor n autocovariances
    double var = lrv / nn;

    const double floor = 1e-12 * (1.0 + h.second_moment);
    if (!(var > floor)) {
        var = floor;
        h.degenerate = true;
    }
    h.variance = var;
    return h;
}

void check_series(const double* y, std::size_t n) {
    if (n < kMinSeriesLength) {
        throw ContractViolation("HAC inference needs at least 8 observations");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i])) throw ContractViolation("series contains a non-finite value");
    }
}

}  // namespace

int bartlett_bandwidth(std::size_t n) {
    const int L = static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
    return L < kMaxBandwidth ? L : kMaxBandwidth;
}

double bartlett_weight(int lag, int bandwidth) {
    return 1.0 - static_cast<double>(lag) / static_cast<double>(bandwidth + 1);
}

HacVariance hac_variance_of_mean(std::span<const double> series, int bandwidth) {
    check_series(series.data(), series.size());
    if (bandwidth < 0 || bandwidth > kMaxBandwidth) throw ContractViolation("bandwidth out of range");
    std::vector<double> scratch(series.size());
    return hac_core(series.data(), series.size(), bandwidth, scratch.data());
}

HacVariance hac_variance_of_mean(std::span<const double> series) {
    return hac_variance_of_mean(series, bartlett_bandwidth(series.size()));
}

ZStatistic z_statistic(std::span<const double> series) {
    const HacVariance h = hac_variance_of_mean(series);
    ZStatistic z;
    z.n = series.size();
    z.bandwidth = h.bandwidth;
    z.hac_variance = h.variance;
    z.degenerate = h.degenerate;
    z.value = h.degenerate ? 0.0 : h.mean / std::sqrt(h.variance);
    return z;
}

ZStatistic z_of_product(const double* x, const double* r, std::size_t n, double* scratch) {
    if (n < kMinSeriesLength) throw ContractViolation("HAC inference needs at least 8 observations");
    double* prod = scratch;
    simd::mul(x, r, prod, n);
    const HacVariance h = hac_core(prod, n, bartlett_bandwidth(n), scratch + n);
    ZStatistic z;
    z.n = n;
    z.bandwidth = h.bandwidth;
    z.hac_variance = h.variance;
    z.degenerate = h.degenerate;
    z.value = h.degenerate ? 0.0 : h.mean / std::sqrt(h.variance);
    return z;
}

double evt_expected_max(double M) {
    if (!(M >= 2.0)) throw std::domain_error("evt_expected_max requires M >= 2");
    const double l = std::log(M);
    const double s = std::sqrt(2.0 * l);
    const double a = s - (std::log(l) + std::log(4.0 * std::numbers::pi)) / (2.0 * s);
    const double b = 1.0 / s;
    return a + kEulerGamma * b;
}

double half_normal_mean() { return std::sqrt(2.0 / std::numbers::pi); }

}  // namespace nullaudit::inference
