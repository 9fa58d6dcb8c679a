#pragma once

#include <cstddef>
#include <string_view>

// Hot loops of the harness: strategy-return products, sums, dot products,
// lagged autocovariance sums for the HAC estimator and the K_eff Gram product. A scalar reference is always
// present; vector variants are picked once at startup from CPU features.
namespace nullaudit::simd {

struct KernelTable {
    const char* name;
    double (*sum)(const double* a, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[l] = sum_{t=l}^{n-1} (y_t - mean)(y_{t-l} - mean), l = 0..max_lag.
    // `scratch` must hold n doubles.
    void (*autocov)(const double* y, std::size_t n, double mean, int max_lag, double* out,
                    double* scratch);
    // Lower triangle (diagonal included) of X'X for column-major n x K `x` into
    // column-major K x K `g`. Entries above the diagonal are unspecified.
    void (*gram)(const double* x, std::size_t n, std::size_t K, double* g);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Table used by the library. NULLAUDIT_SIMD=scalar in the environment forces the
// reference path.
const KernelTable& active();
std::string_view active_name();

inline double sum(const double* a, std::size_t n) { return active().sum(a, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void mul(const double* a, const double* b, double* out, std::size_t n) {
    active().mul(a, b, out, n);
}
inline void autocov(const double* y, std::size_t n, double mean, int max_lag, double* out,
                    double* scratch) {
    active().autocov(y, n, mean, max_lag, out, scratch);
}

inline void gram(const double* x, std::size_t n, std::size_t K, double* g) { active().gram(x, n, K, g); }

}  // namespace nullaudit::simd
