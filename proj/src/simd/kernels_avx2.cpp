// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>

#include "kernels.hpp"

namespace nullaudit::simd::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i];
    return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void autocov_avx2(const double* y, std::size_t n, double mean, int max_lag, double* out,
                  double* scratch) {
    const __m256d m = _mm256_set1_pd(mean);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(scratch + i, _mm256_sub_pd(_mm256_loadu_pd(y + i), m));
    }
    for (; i < n; ++i) scratch[i] = y[i] - mean;
    for (int l = 0; l <= max_lag; ++l) {
        const auto lag = static_cast<std::size_t>(l);
        out[l] = lag < n ? dot_avx2(scratch + lag, scratch, n - lag) : 0.0;
    }
}

// Row-blocked so a slab of every column stays in cache; 2 x 4 register tiles.
void gram_avx2(const double* x, std::size_t n, std::size_t K, double* g) {
    constexpr std::size_t kRows = 128;
    for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t i = j; i < K; ++i) g[i + j * K] = 0.0;
    }
    for (std::size_t r0 = 0; r0 < n; r0 += kRows) {
        const std::size_t m = std::min(kRows, n - r0);
        const std::size_t m4 = m & ~std::size_t{3};
        for (std::size_t j0 = 0; j0 < K; j0 += 4) {
            const std::size_t jw = std::min<std::size_t>(4, K - j0);
            for (std::size_t i0 = j0; i0 < K; i0 += 2) {
                const std::size_t iw = std::min<std::size_t>(2, K - i0);
                if (jw == 4 && iw == 2) {
                    const double* a0 = x + i0 * n + r0;
                    const double* a1 = a0 + n;
                    const double* b0 = x + j0 * n + r0;
                    const double* b1 = b0 + n;
                    const double* b2 = b1 + n;
                    const double* b3 = b2 + n;
                    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
                    __m256d c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
                    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
                    __m256d c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
                    for (std::size_t t = 0; t < m4; t += 4) {
                        const __m256d x0 = _mm256_loadu_pd(a0 + t);
                        const __m256d x1 = _mm256_loadu_pd(a1 + t);
                        __m256d y = _mm256_loadu_pd(b0 + t);
                        c00 = _mm256_fmadd_pd(x0, y, c00);
                        c10 = _mm256_fmadd_pd(x1, y, c10);
                        y = _mm256_loadu_pd(b1 + t);
                        c01 = _mm256_fmadd_pd(x0, y, c01);
                        c11 = _mm256_fmadd_pd(x1, y, c11);
                        y = _mm256_loadu_pd(b2 + t);
                        c02 = _mm256_fmadd_pd(x0, y, c02);
                        c12 = _mm256_fmadd_pd(x1, y, c12);
                        y = _mm256_loadu_pd(b3 + t);
                        c03 = _mm256_fmadd_pd(x0, y, c03);
                        c13 = _mm256_fmadd_pd(x1, y, c13);
                    }
                    const __m256d acc[2][4] = {{c00, c01, c02, c03}, {c10, c11, c12, c13}};
                    const double* as[2] = {a0, a1};
                    const double* bs[4] = {b0, b1, b2, b3};
                    for (std::size_t a = 0; a < 2; ++a) {
                        for (std::size_t b = 0; b < 4; ++b) {
                            double s = hsum(acc[a][b]);
                            for (std::size_t t = m4; t < m; ++t) s += as[a][t] * bs[b][t];
                            g[(i0 + a) + (j0 + b) * K] += s;
                        }
                    }
                } else {
                    for (std::size_t b = 0; b < jw; ++b) {
                        for (std::size_t a = 0; a < iw; ++a) {
                            g[(i0 + a) + (j0 + b) * K] += dot_avx2(x + (i0 + a) * n + r0, x + (j0 + b) * n + r0, m);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace nullaudit::simd::detail
