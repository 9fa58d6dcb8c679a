#pragma once

#include <cstddef>

namespace nullaudit::simd::detail {

double sum_scalar(const double* a, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);
void mul_scalar(const double* a, const double* b, double* out, std::size_t n);
void autocov_scalar(const double* y, std::size_t n, double mean, int max_lag, double* out,
                    double* scratch);
void gram_scalar(const double* x, std::size_t n, std::size_t K, double* g);

#if defined(NULLAUDIT_HAVE_AVX2)
double sum_avx2(const double* a, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
void mul_avx2(const double* a, const double* b, double* out, std::size_t n);
void autocov_avx2(const double* y, std::size_t n, double mean, int max_lag, double* out,
                  double* scratch);
void gram_avx2(const double* x, std::size_t n, std::size_t K, double* g);
#endif

#if defined(__aarch64__)
double sum_neon(const double* a, std::size_t n);
double dot_neon(const double* a, const double* b, std::size_t n);
void mul_neon(const double* a, const double* b, double* out, std::size_t n);
void autocov_neon(const double* y, std::size_t n, double mean, int max_lag, double* out,
                  double* scratch);
void gram_neon(const double* x, std::size_t n, std::size_t K, double* g);
#endif

}  // namespace nullaudit::simd::detail
