// AArch64 variant. Advanced SIMD is baseline on aarch64, so no extra flags.
#include <arm_neon.h>

#include "kernels.hpp"

namespace nullaudit::simd::detail {

double sum_neon(const double* a, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vaddq_f64(acc0, vld1q_f64(a + i));
        acc1 = vaddq_f64(acc1, vld1q_f64(a + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i];
    return s;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void autocov_neon(const double* y, std::size_t n, double mean, int max_lag, double* out,
                  double* scratch) {
    const float64x2_t m = vdupq_n_f64(mean);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(scratch + i, vsubq_f64(vld1q_f64(y + i), m));
    for (; i < n; ++i) scratch[i] = y[i] - mean;
    for (int l = 0; l <= max_lag; ++l) {
        const auto lag = static_cast<std::size_t>(l);
        out[l] = lag < n ? dot_neon(scratch + lag, scratch, n - lag) : 0.0;
    }
}

void gram_neon(const double* x, std::size_t n, std::size_t K, double* g) {
    for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t i = j; i < K; ++i) g[i + j * K] = dot_neon(x + i * n, x + j * n, n);
    }
}

}  // namespace nullaudit::simd::detail
