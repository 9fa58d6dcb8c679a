#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nullaudit::inference {

enum class Phase { InSample, WalkForward };

inline constexpr std::size_t kMinSeriesLength = 8;
inline constexpr double kEulerGamma = 0.5772156649015329;

// floor(4 (n/100)^{2/9}).
int bartlett_bandwidth(std::size_t n);
// 1 - l/(L+1).
double bartlett_weight(int lag, int bandwidth);

struct HacVariance {
    double variance = 0.0;  // variance of the sample mean, floored
    double mean = 0.0;
    double second_moment = 0.0;
    int bandwidth = 0;
    bool degenerate = false;  // hit the floor: constant or numerically flat series
};

struct ZStatistic {
    double value = 0.0;
    std::size_t n = 0;
    int bandwidth = 0;
    double hac_variance = 0.0;
    bool degenerate = false;  // value is 0 and must not be trusted
};

// Bartlett long-run variance of the mean with divisor-n autocovariances.
// Throws ContractViolation for n < 8 or non-finite input. A degenerate series
// is reported through the flag, never through an exception.
HacVariance hac_variance_of_mean(std::span<const double> series);
// Same, with an explicit bandwidth (bandwidth 0 gives sample variance / n).
HacVariance hac_variance_of_mean(std::span<const double> series, int bandwidth);

ZStatistic z_statistic(std::span<const double> series);

// Z of the strategy return x_t * r_t without materialising it in the caller.
// `scratch` must hold 2 * n doubles.
ZStatistic z_of_product(const double* x, const double* r, std::size_t n, double* scratch);

// a_M + gamma * b_M. Throws std::domain_error for M < 2.
double evt_expected_max(double M);

// sqrt(2/pi).
double half_normal_mean();

}  // namespace nullaudit::inference
