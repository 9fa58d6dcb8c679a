#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "nullaudit/environments.hpp"
#include "nullaudit/errors.hpp"
#include "nullaudit/inference.hpp"
#include "nullaudit/rng.hpp"

using namespace nullaudit;
using namespace nullaudit::inference;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
    rng::Stream s(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = s.normal();
    return v;
}

double evt_formula(double M) {
    const double l = std::sqrt(2.0 * std::log(M));
    const double a = l - (std::log(std::log(M)) + std::log(4.0 * M_PI)) / (2.0 * l);
    return a + kEulerGamma / l;
}

}  // namespace

TEST(Inference, BartlettBandwidth) {
    EXPECT_EQ(bartlett_bandwidth(100), 4);
    EXPECT_EQ(bartlett_bandwidth(252), 4);
    EXPECT_EQ(bartlett_bandwidth(1008), 6);
}

TEST(Inference, BartlettWeightsDecreaseInUnitInterval) {
    const int L = 6;
    double prev = 1.0 + 1e-15;
    for (int l = 0; l <= L; ++l) {
        const double w = bartlett_weight(l, L);
        EXPECT_GT(w, 0.0);
        EXPECT_LE(w, 1.0);
        EXPECT_LT(w, prev);
        prev = w;
    }
}

TEST(Inference, IidHacMatchesSampleVarianceOfMean) {
    const auto x = normals(100000, 3);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    const double naive = ss / (x.size() - 1.0) / x.size();
    const auto h = hac_variance_of_mean(x);
    EXPECT_NEAR(h.variance, naive, 0.03 * naive);
    EXPECT_FALSE(h.degenerate);
}

TEST(Inference, ZeroBandwidthIsSampleVarianceOfMean) {
    const auto x = normals(500, 4);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    // Divisor-n autocovariances.
    EXPECT_NEAR(hac_variance_of_mean(x, 0).variance, ss / x.size() / x.size(), 1e-15);
}

TEST(Inference, AllZeroSeriesIsDegenerate) {
    const std::vector<double> z(300, 0.0);
    EXPECT_TRUE(hac_variance_of_mean(z).degenerate);
    const auto s = z_statistic(z);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.value, 0.0);
}

TEST(Inference, ConstantSeriesIsDegenerate) {
    const std::vector<double> c(300, 0.01);
    EXPECT_TRUE(z_statistic(c).degenerate);
}

TEST(Inference, ZeroMeanGivesZeroZ) {
    std::vector<double> x;
    for (int i = 0; i < 200; ++i) {
        x.push_back(0.5 * (i % 7 + 1));
        x.push_back(-0.5 * (i % 7 + 1));
    }
    EXPECT_EQ(std::accumulate(x.begin(), x.end(), 0.0), 0.0);
    EXPECT_EQ(z_statistic(x).value, 0.0);
}

TEST(Inference, ShortOrNonFiniteInputRejected) {
    EXPECT_THROW(z_statistic(std::vector<double>(7, 1.0)), ContractViolation);
    auto x = normals(50, 1);
    x[10] = std::nan("");
    EXPECT_THROW(z_statistic(x), ContractViolation);
}

TEST(Inference, ScaleInvariance) {
    auto x = normals(1000, 5);
    for (auto& v : x) v += 0.05;
    const auto a = z_statistic(x);
    auto y = x;
    for (auto& v : y) v *= 7.5;
    const auto b = z_statistic(y);
    EXPECT_NEAR(a.value, b.value, 1e-10 * std::fabs(a.value));
    EXPECT_NEAR(b.hac_variance, 56.25 * a.hac_variance, 1e-10 * b.hac_variance);
}

TEST(Inference, HacIsNonNegativeOnAdversarialSeries) {
    // Alternating series has strongly negative autocovariances.
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
    for (int L : {0, 1, 3, 10, 50}) EXPECT_GE(hac_variance_of_mean(x, L).variance, 0.0);
}

TEST(Inference, ProductMatchesMaterializedSeries) {
    const auto x = normals(777, 6);
    const auto r = normals(777, 7);
    std::vector<double> p(777), scratch(2 * 777);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] * r[i];
    const auto a = z_statistic(p);
    const auto b = z_of_product(x.data(), r.data(), 777, scratch.data());
    EXPECT_NEAR(a.value, b.value, 1e-12);
    EXPECT_EQ(a.bandwidth, b.bandwidth);
}

TEST(Inference, NullSizeOfFixedSignal) {
    const std::size_t reps = 10000, n = 1000;
    const auto x = normals(n, 8);  // predetermined signal, fixed across replications
    std::vector<double> scratch(2 * n);
    double sum = 0.0, sum2 = 0.0;
    std::size_t rejections = 0;
    for (std::size_t m = 0; m < reps; ++m) {
        const auto p = env::generate(env::default_spec(env::Family::WhiteNoise, n, rng::derive(99, m)));
        const double z = z_of_product(x.data(), p.r.data(), n, scratch.data()).value;
        sum += z;
        sum2 += z * z;
        rejections += std::fabs(z) > 1.96;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(sum2 / reps - mean * mean);
    EXPECT_LT(std::fabs(mean), 0.04);
    EXPECT_NEAR(sd, 1.0, 0.04);
    const double size = double(rejections) / reps;
    EXPECT_GE(size, 0.04);
    EXPECT_LE(size, 0.07);
}

TEST(Inference, LookaheadSignalDivergesWithSqrtN) {
    double prev = 0.0;
    for (std::size_t n : {250, 1000, 4000}) {
        const auto p = env::generate(env::default_spec(env::Family::WhiteNoise, n + 1, 12));
        std::vector<double> s(n);
        for (std::size_t t = 0; t < n; ++t) s[t] = std::fabs(p.r[t + 1]);  // sign(r_{t+1}) * r_{t+1}
        const double z = z_statistic(s).value;
        EXPECT_GT(z, 10.0);
        if (prev > 0) EXPECT_NEAR(z / prev, 2.0, 0.3);
        prev = z;
    }
}

TEST(Inference, EvtExpectedMax) {
    EXPECT_NEAR(evt_expected_max(1000), 3.27, 0.005);
    EXPECT_DOUBLE_EQ(evt_expected_max(2), evt_formula(2));
    EXPECT_NEAR(evt_expected_max(2 * 10.09), 1.95, 0.005);
    EXPECT_THROW(evt_expected_max(1.5), std::domain_error);
}

TEST(Inference, HalfNormalMean) {
    EXPECT_NEAR(half_normal_mean(), 0.7978845608, 1e-10);
    const auto x = normals(1000000, 13);
    double s = 0.0, s2 = 0.0;
    for (double v : x) {
        s += std::fabs(v);
        s2 += v * v;
    }
    const double m = s / x.size();
    const double se = std::sqrt((s2 / x.size() - m * m) / x.size());
    EXPECT_NEAR(m, half_normal_mean(), 3.0 * se);
}
