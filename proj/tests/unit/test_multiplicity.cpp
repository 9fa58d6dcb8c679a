#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/multiplicity.hpp"
#include "nullaudit/rng.hpp"

using namespace nullaudit;
using namespace nullaudit::multiplicity;
using Eigen::MatrixXd;

namespace {

MatrixXd gaussian(std::size_t T, std::size_t K, std::uint64_t seed) {
    rng::Stream s(seed);
    MatrixXd m(T, K);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = s.normal();
    return m;
}

MatrixXd block_corr(std::size_t blocks, std::size_t size, double rho) {
    const std::size_t K = blocks * size;
    MatrixXd c = MatrixXd::Identity(K, K);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j)
                if (i != j) c(b * size + i, b * size + j) = rho;
    return c;
}

// Random correlation matrix from a random Gram.
MatrixXd random_corr(std::size_t K, std::uint64_t seed) {
    const MatrixXd a = gaussian(K + 3, K, seed);
    MatrixXd g = a.transpose() * a;
    const Eigen::VectorXd d = g.diagonal().cwiseSqrt().cwiseInverse();
    g = d.asDiagonal() * g * d.asDiagonal();
    g.diagonal().setOnes();
    return g;
}

}  // namespace

TEST(Multiplicity, IdentityAndOnes) {
    EXPECT_NEAR(k_eff(MatrixXd::Identity(50, 50)).k_eff, 50.0, 1e-12);
    EXPECT_NEAR(k_eff(MatrixXd::Ones(50, 50)).k_eff, 1.0, 1e-12);
}

TEST(Multiplicity, FiveCollinearBlocks) {
    EXPECT_NEAR(k_eff(block_corr(5, 100, 1.0)).k_eff, 5.0, 1e-10);
}

TEST(Multiplicity, PopulationClosedForm) {
    EXPECT_NEAR(k_eff_population(std::vector<std::size_t>(10, 50), 1.0), 10.0, 1e-12);
    // 250000 / 90320 = 2.768, which the published table rounds to 2.8.
    EXPECT_NEAR(k_eff_population({500}, 0.6), 250000.0 / 90320.0, 1e-12);
    EXPECT_NEAR(k_eff_population({500}, 0.6), 2.8, 0.05);
    EXPECT_NEAR(k_eff_population(std::vector<std::size_t>(500, 1), 0.3), 500.0, 1e-9);
    EXPECT_NEAR(k_eff_population({20, 20, 20}, 0.4), k_eff(block_corr(3, 20, 0.4)).k_eff, 1e-10);
}

TEST(Multiplicity, NonUnitDiagonalRejected) {
    MatrixXd c = MatrixXd::Identity(4, 4);
    c(2, 2) = 1.0 + 1e-6;
    EXPECT_THROW(k_eff(c), ContractViolation);
}

TEST(Multiplicity, FrobeniusEqualsEigenForm) {
    for (std::size_t K : {2, 10, 57, 200}) {
        const MatrixXd c = random_corr(K, K);
        const double a = k_eff(c).k_eff;
        const double b = k_eff_eigen(c);
        EXPECT_NEAR(a, b, 1e-9 * a) << "K=" << K;
    }
}

TEST(Multiplicity, BoundsOnRandomCorrelations) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const std::size_t K = 2 + s * 3;
        const double k = k_eff(random_corr(K, 100 + s)).k_eff;
        EXPECT_GE(k, 1.0 - 1e-12);
        EXPECT_LE(k, double(K) + 1e-12);
    }
}

TEST(Multiplicity, PermutationInvariance) {
    const MatrixXd c = random_corr(40, 9);
    std::vector<int> idx(40);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), std::mt19937(3));
    Eigen::PermutationMatrix<Eigen::Dynamic> P(40);
    for (int i = 0; i < 40; ++i) P.indices()[i] = idx[i];
    const MatrixXd pc = P * c * P.transpose();
    EXPECT_NEAR(k_eff(pc).k_eff, k_eff(c).k_eff, 1e-10);
}

TEST(Multiplicity, MonotoneInRho) {
    double prev = 1e300;
    for (double rho = 0.0; rho < 1.0; rho += 0.05) {
        const double k = k_eff_population({100}, rho);
        EXPECT_LT(k, prev);
        prev = k;
    }
}

TEST(Multiplicity, SingleColumnIsOne) {
    CandidatePanel p;
    p.data = gaussian(250, 1, 1);
    const auto s = shrink_correlation(p);
    EXPECT_EQ(s.sigma.rows(), 1);
    EXPECT_DOUBLE_EQ(s.sigma(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(s.lambda, 1.0);
    EXPECT_DOUBLE_EQ(estimate_k_eff(p).k_eff, 1.0);
}

TEST(Multiplicity, ShrinkageOnIndependentPanel) {
    double bias = 0.0, sq = 0.0, lam = 0.0;
    const int reps = 50;
    for (int i = 0; i < reps; ++i) {
        const auto e = estimate_k_eff(gaussian(250, 100, 1000 + i));
        bias += e.k_eff - 100.0;
        sq += (e.k_eff - 100.0) * (e.k_eff - 100.0);
        lam += e.shrinkage_lambda;
    }
    EXPECT_LE(std::fabs(bias / reps), 0.05);
    EXPECT_LE(std::sqrt(sq / reps), 0.05);
    EXPECT_NEAR(lam / reps, 0.99, 0.02);
}

TEST(Multiplicity, HighDimensionalPanelStaysDefined) {
    const auto e = estimate_k_eff(gaussian(250, 500, 77));
    EXPECT_TRUE(std::isfinite(e.k_eff));
    EXPECT_NEAR(e.k_eff, 500.0, 0.5);
}

TEST(Multiplicity, NaiveEstimatorIsBiasedOnIndependentPanel) {
    const auto e = sample_k_eff(gaussian(250, 100, 5));
    EXPECT_LE(e.k_eff - 100.0, -20.0);
}

TEST(Multiplicity, FastPathMatchesExplicitShrinkage) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        MatrixXd x = gaussian(120, 30, 50 + s);
        // Inject dependence.
        for (Eigen::Index j = 1; j < x.cols(); ++j) x.col(j) += 0.8 * x.col(0);
        CandidatePanel p;
        p.data = x;
        const auto sh = shrink_correlation(p);
        const auto fast = estimate_k_eff(p);
        EXPECT_NEAR(fast.k_eff, k_eff(sh.sigma).k_eff, 1e-8 * fast.k_eff);
        EXPECT_NEAR(fast.shrinkage_lambda, sh.lambda, 1e-10);
    }
}

TEST(Multiplicity, DegenerateColumnsDroppedAndCountedAsZero) {
    MatrixXd x = gaussian(200, 5, 6);
    x.col(3).setZero();
    CandidatePanel p;
    p.data = x;
    const auto sh = shrink_correlation(p);
    ASSERT_EQ(sh.dropped.size(), 1u);
    EXPECT_EQ(sh.dropped[0], 3u);
    const auto e = estimate_k_eff(p);
    EXPECT_EQ(e.K_nominal, 5u);
    EXPECT_EQ(e.K_dropped, 1u);
    EXPECT_LE(e.k_eff, 4.0 + 1e-9);

    x.setZero();
    p.data = x;
    EXPECT_THROW(shrink_correlation(p), ContractViolation);
}

TEST(Multiplicity, FactorScenarioTracksTruth) {
    // m=3 factors, K=100, T=250; loadings fixed so the truth is a single number.
    const std::size_t K = 100, T = 250, m = 3;
    const MatrixXd B = gaussian(K, m, 4242);
    MatrixXd cov = B * B.transpose() + MatrixXd::Identity(K, K);
    const Eigen::VectorXd d = cov.diagonal().cwiseSqrt().cwiseInverse();
    const MatrixXd corr = d.asDiagonal() * cov * d.asDiagonal();
    MatrixXd c = corr;
    c.diagonal().setOnes();
    const double truth = k_eff(c).k_eff;
    double bias = 0.0, sq = 0.0;
    const int reps = 40;
    for (int i = 0; i < reps; ++i) {
        const MatrixXd F = gaussian(T, m, 9000 + i);
        const MatrixXd E = gaussian(T, K, 19000 + i);
        const MatrixXd X = F * B.transpose() + E;
        const double k = estimate_k_eff(X).k_eff;
        bias += k - truth;
        sq += (k - truth) * (k - truth);
    }
    EXPECT_LE(std::fabs(bias / reps), 0.35);
    EXPECT_LE(std::sqrt(sq / reps), 0.40);
}
