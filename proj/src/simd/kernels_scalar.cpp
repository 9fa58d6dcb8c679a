#include "kernels.hpp"

namespace nullaudit::simd::detail {

double sum_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void autocov_scalar(const double* y, std::size_t n, double mean, int max_lag, double* out,
                    double* scratch) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = y[i] - mean;
    for (int l = 0; l <= max_lag; ++l) {
        const auto lag = static_cast<std::size_t>(l);
        out[l] = lag < n ? dot_scalar(scratch + lag, scratch, n - lag) : 0.0;
    }
}

void gram_scalar(const double* x, std::size_t n, std::size_t K, double* g) {
    for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t i = j; i < K; ++i) g[i + j * K] = dot_scalar(x + i * n, x + j * n, n);
    }
}

}  // namespace nullaudit::simd::detail
