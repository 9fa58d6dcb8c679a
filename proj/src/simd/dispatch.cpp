#include <cstdlib>
#include <cstring>

#include "kernels.hpp"
#include "nullaudit/simd.hpp"

namespace nullaudit::simd {

using namespace detail;

const KernelTable& scalar_kernels() {
    static const KernelTable t{"scalar", sum_scalar, dot_scalar, mul_scalar, autocov_scalar, gram_scalar};
    return t;
}

const KernelTable* avx2_kernels() {
#if defined(NULLAUDIT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    static const KernelTable t{"avx2", sum_avx2, dot_avx2, mul_avx2, autocov_avx2, gram_avx2};
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &t : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(__aarch64__)
    static const KernelTable t{"neon", sum_neon, dot_neon, mul_neon, autocov_neon, gram_neon};
    return &t;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable& pick() {
    const char* force = std::getenv("NULLAUDIT_SIMD");
    if (force != nullptr && std::strcmp(force, "scalar") == 0) return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    if (const KernelTable* t = neon_kernels()) return *t;
    return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& t = pick();
    return t;
}

std::string_view active_name() { return active().name; }

}  // namespace nullaudit::simd
