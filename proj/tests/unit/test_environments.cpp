#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "nullaudit/environments.hpp"
#include "nullaudit/errors.hpp"

using namespace nullaudit;
using env::Family;

namespace {

double mean(const std::vector<double>& r) { return std::accumulate(r.begin(), r.end(), 0.0) / r.size(); }

double autocov(const std::vector<double>& r, std::size_t lag) {
    const double m = mean(r);
    double s = 0.0;
    for (std::size_t t = lag; t < r.size(); ++t) s += (r[t] - m) * (r[t - lag] - m);
    return s / static_cast<double>(r.size());
}

double daily_var(double ann) { return ann * ann / env::kTradingDays; }

}  // namespace

TEST(Environments, DefaultCalibrations) {
    const auto rs = std::get<env::RegimeSwitchParams>(env::default_calibration(Family::RegimeSwitch));
    EXPECT_DOUBLE_EQ(rs.sigma_ann_low, 0.10);
    EXPECT_DOUBLE_EQ(rs.vol_multiplier, 3.0);
    EXPECT_DOUBLE_EQ(rs.p11, 0.98);
    EXPECT_DOUBLE_EQ(rs.p22, 0.98);
    const auto g = std::get<env::Garch11Params>(env::default_calibration(Family::Garch11));
    EXPECT_DOUBLE_EQ(g.alpha, 0.10);
    EXPECT_DOUBLE_EQ(g.beta, 0.85);
    EXPECT_DOUBLE_EQ(g.sigma_ann, 0.20);
    EXPECT_DOUBLE_EQ(std::get<env::WhiteNoiseParams>(env::default_calibration(Family::WhiteNoise)).sigma_ann, 0.20);
}

TEST(Environments, WhiteNoiseVolatility) {
    const auto p = env::generate(env::default_spec(Family::WhiteNoise, 2520, 11));
    ASSERT_EQ(p.size(), 2520u);
    const double sd = std::sqrt(autocov(p.r, 0) * p.r.size() / (p.r.size() - 1.0));
    EXPECT_GE(sd * std::sqrt(252.0), 0.19);
    EXPECT_LE(sd * std::sqrt(252.0), 0.21);
}

TEST(Environments, Ma1LagOneAutocovariance) {
    const auto p = env::generate(env::default_spec(Family::MA1Placebo, 1000000, 5));
    const double se2 = daily_var(0.20) / 1.25;
    EXPECT_NEAR(autocov(p.r, 1), -0.5 * se2, 0.02 * 0.5 * se2);
    EXPECT_NEAR(autocov(p.r, 0), daily_var(0.20), 0.02 * daily_var(0.20));
}

TEST(Environments, GarchUnconditionalMoments) {
    const auto p = env::generate(env::default_spec(Family::Garch11, 1000000, 6));
    const double v = autocov(p.r, 0);
    EXPECT_NEAR(v, daily_var(0.20), 0.02 * daily_var(0.20));
    EXPECT_LT(std::fabs(mean(p.r)), 3.0 * std::sqrt(v / p.r.size()));
}

// Martingale-difference nulls: no linear predictability at small lags.
TEST(Environments, MdsNullsHaveNoLinearAutocorrelation) {
    const std::size_t n = 1000000;
    for (auto f : {Family::WhiteNoise, Family::RegimeSwitch, Family::FactorNull, Family::Garch11}) {
        const auto p = env::generate(env::default_spec(f, n, 21));
        const double g0 = autocov(p.r, 0);
        for (std::size_t lag = 1; lag <= 5; ++lag) {
            EXPECT_LT(std::fabs(autocov(p.r, lag) / g0), 4.0 / std::sqrt(double(n)))
                << env::to_string(f) << " lag " << lag;
        }
    }
}

TEST(Environments, PlaceboHasNoAutocovarianceBeyondLagOne) {
    const std::size_t n = 1000000;
    const auto p = env::generate(env::default_spec(Family::MA1Placebo, n, 23));
    const double g0 = autocov(p.r, 0);
    for (std::size_t lag = 2; lag <= 5; ++lag) EXPECT_LT(std::fabs(autocov(p.r, lag) / g0), 4.0 / std::sqrt(double(n)));
}

TEST(Environments, RegimeOccupancyMatchesStationaryProbability) {
    // Asymmetric persistence so the occupancy is not 1/2; checked through the
    // mixture variance, which is linear in the state-1 fraction.
    auto s = env::default_spec(Family::RegimeSwitch, 1000000, 24);
    s.params = env::RegimeSwitchParams{0.10, 3.0, 0.99, 0.97};
    const auto p = env::generate(s);
    const double lo = 0.10 / std::sqrt(252.0);
    const double hi = 3.0 * lo;
    // Posterior-free check: E[r^2] = pi1 lo^2 + (1 - pi1) hi^2.
    const double pi1 = (1 - 0.97) / ((1 - 0.99) + (1 - 0.97));
    const double expect = pi1 * lo * lo + (1 - pi1) * hi * hi;
    EXPECT_NEAR(autocov(p.r, 0), expect, 0.03 * expect);
}

TEST(Environments, TarActivationRateUnderZeroPhi) {
    auto s = env::default_spec(Family::TarPositive, 1000000, 25);
    s.params = env::TarParams{0.0, 1.0, 0.15};
    const auto p = env::generate(s);
    const double sd = 0.15 / std::sqrt(252.0);
    std::size_t hits = 0;
    for (std::size_t t = 1; t < p.r.size(); ++t) hits += std::fabs(p.r[t - 1]) > sd;
    const double rate = double(hits) / double(p.r.size() - 1);
    EXPECT_NEAR(rate, 2.0 * (1.0 - 0.8413447460685429), 0.01);
}

TEST(Environments, GarchSquaresAreAutocorrelated) {
    const auto p = env::generate(env::default_spec(Family::Garch11, 200000, 22));
    std::vector<double> sq(p.r.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = p.r[i] * p.r[i];
    EXPECT_GT(autocov(sq, 1) / autocov(sq, 0), 0.05);
}

TEST(Environments, SeedReplayAndSeparation) {
    const auto a = env::generate(env::default_spec(Family::RegimeSwitch, 500, 3));
    const auto b = env::generate(env::default_spec(Family::RegimeSwitch, 500, 3));
    const auto c = env::generate(env::default_spec(Family::RegimeSwitch, 500, 4));
    EXPECT_EQ(a.r, b.r);
    EXPECT_NE(a.r, c.r);
}

TEST(Environments, DomainErrors) {
    auto s = env::default_spec(Family::MA1Placebo, 100, 1);
    s.params = env::MA1PlaceboParams{0.2, 1.0};
    EXPECT_THROW(env::generate(s), ParameterDomainError);
    s = env::default_spec(Family::Garch11, 100, 1);
    s.params = env::Garch11Params{0.2, 0.8, 0.2};
    EXPECT_THROW(env::generate(s), ParameterDomainError);
    s = env::default_spec(Family::WhiteNoise, 1, 1);
    EXPECT_THROW(env::generate(s), ParameterDomainError);
    s = env::default_spec(Family::WhiteNoise, 100, 1);
    s.params = env::WhiteNoiseParams{-0.1};
    EXPECT_THROW(env::generate(s), ParameterDomainError);
    s = env::default_spec(Family::RegimeSwitch, 100, 1);
    s.params = env::RegimeSwitchParams{0.1, 3.0, 1.0, 0.98};
    EXPECT_THROW(env::generate(s), ParameterDomainError);
}

TEST(Environments, BlindDrawsStayInRange) {
    env::ParameterDistribution d;
    d.family = Family::MA1Placebo;
    d.ranges["theta"] = {-0.8, -0.2};
    d.draw_count = 10;
    d.seed = 77;
    const auto draws = env::draw_parameter_sets(d);
    ASSERT_EQ(draws.size(), 10u);
    for (const auto& x : draws) {
        const double th = std::get<env::MA1PlaceboParams>(x.spec.params).theta;
        EXPECT_GE(th, -0.8);
        EXPECT_LE(th, -0.2);
    }
}

TEST(Environments, PointMassRange) {
    env::ParameterDistribution d;
    d.family = Family::MA1Placebo;
    d.ranges["theta"] = {-0.5, -0.5};
    d.draw_count = 4;
    for (const auto& x : env::draw_parameter_sets(d)) {
        EXPECT_DOUBLE_EQ(std::get<env::MA1PlaceboParams>(x.spec.params).theta, -0.5);
    }
}

TEST(Environments, NonStationaryRangeRejectedBeforeDrawing) {
    env::ParameterDistribution d;
    d.family = Family::Garch11;
    d.ranges["alpha"] = {0.05, 0.2};
    d.ranges["beta"] = {0.8, 0.85};
    EXPECT_THROW(env::draw_parameter_sets(d), ParameterDomainError);
    d.ranges.clear();
    d.ranges["gamma"] = {0.0, 1.0};
    EXPECT_THROW(env::draw_parameter_sets(d), ParameterDomainError);
}

TEST(Environments, DevAndAuditLineagesAreDisjoint) {
    env::ParameterDistribution d;
    d.family = Family::MA1Placebo;
    d.ranges["theta"] = {-0.8, -0.2};
    d.draw_count = 20;
    d.seed = 5;
    d.role = env::Role::Dev;
    const auto dev = env::draw_parameter_sets(d);
    d.role = env::Role::Audit;
    const auto aud = env::draw_parameter_sets(d);
    EXPECT_NO_THROW(env::check_disjoint(dev, aud));
    EXPECT_THROW(env::check_disjoint(dev, dev), ContractViolation);
}

TEST(Environments, JsonRoundTrip) {
    auto s = env::default_spec(Family::TarPositive, 300, 9);
    s.params = env::TarParams{0.15, 2.0, 0.15};
    const auto back = env::spec_from_json(env::to_json(s));
    EXPECT_EQ(env::to_json(back), env::to_json(s));
    EXPECT_EQ(env::generate(back).r, env::generate(s).r);

    env::ParameterDistribution d;
    d.family = Family::MA1Placebo;
    d.ranges["theta"] = {-0.8, -0.2};
    d.draw_count = 3;
    d.role = env::Role::Audit;
    EXPECT_EQ(env::to_json(env::distribution_from_json(env::to_json(d))), env::to_json(d));
}

TEST(Environments, BinaryRoundTrip) {
    const auto p = env::generate(env::default_spec(Family::FactorNull, 257, 2));
    const auto file = std::filesystem::temp_directory_path() / "nullaudit_env_roundtrip.bin";
    env::write_binary(p, file);
    const auto q = env::read_binary(file);
    EXPECT_EQ(q.r, p.r);
    std::filesystem::remove(file);
}
