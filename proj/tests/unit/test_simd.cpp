#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nullaudit/simd.hpp"

using namespace nullaudit;

namespace {

std::vector<double> randvec(std::size_t n, unsigned seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

std::vector<const simd::KernelTable*> variants() {
    std::vector<const simd::KernelTable*> v;
    if (auto* t = simd::avx2_kernels()) v.push_back(t);
    if (auto* t = simd::neon_kernels()) v.push_back(t);
    return v;
}

void expect_close(double a, double b, double scale) { EXPECT_NEAR(a, b, 1e-12 * (1.0 + scale)); }

}  // namespace

TEST(Simd, VectorVariantsMatchScalarReference) {
    const auto& ref = simd::scalar_kernels();
    const auto vs = variants();
    if (vs.empty()) GTEST_SKIP() << "no vector variant on this CPU";
    for (const auto* v : vs) {
        for (std::size_t n : {0, 1, 3, 4, 7, 8, 9, 31, 64, 1001}) {
            const auto a = randvec(n, 1 + static_cast<unsigned>(n));
            const auto b = randvec(n, 1000 + static_cast<unsigned>(n));
            const double scale = static_cast<double>(n);
            expect_close(v->sum(a.data(), n), ref.sum(a.data(), n), scale);
            expect_close(v->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), scale);
            std::vector<double> o1(n), o2(n);
            v->mul(a.data(), b.data(), o1.data(), n);
            ref.mul(a.data(), b.data(), o2.data(), n);
            for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(o1[i], o2[i]);
            if (n > 0) {
                const int L = 6;
                std::vector<double> c1(L + 1), c2(L + 1), s(n);
                v->autocov(a.data(), n, 0.1, L, c1.data(), s.data());
                ref.autocov(a.data(), n, 0.1, L, c2.data(), s.data());
                for (int l = 0; l <= L; ++l) expect_close(c1[l], c2[l], scale);
            }
        }
    }
}

TEST(Simd, GramMatchesScalarOnRaggedShapes) {
    const auto& ref = simd::scalar_kernels();
    const auto vs = variants();
    if (vs.empty()) GTEST_SKIP() << "no vector variant on this CPU";
    for (const auto* v : vs) {
        for (auto [n, K] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {5, 3}, {130, 7}, {257, 10}, {300, 33}}) {
            const auto x = randvec(n * K, static_cast<unsigned>(n * 31 + K));
            std::vector<double> g1(K * K), g2(K * K);
            v->gram(x.data(), n, K, g1.data());
            ref.gram(x.data(), n, K, g2.data());
            for (std::size_t j = 0; j < K; ++j) {
                for (std::size_t i = j; i < K; ++i) expect_close(g1[i + j * K], g2[i + j * K], static_cast<double>(n));
            }
        }
    }
}

TEST(Simd, ActiveTableIsNamed) {
    EXPECT_FALSE(simd::active_name().empty());
}
