#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nullaudit/breakeven.hpp"
#include "nullaudit/errors.hpp"

using namespace nullaudit;
using namespace nullaudit::breakeven;

TEST(BreakEven, FiftyBasisPoints) {
    // One year long, flat on 10 separate days: 10 exits plus 10 re-entries.
    std::vector<double> s(252, 1.0), r(252, 0.10 / 242.0);
    for (int i = 0; i < 10; ++i) {
        s[10 + 20 * i] = 0.0;
        r[10 + 20 * i] = 0.0;
    }
    const auto b = breakeven_cost(s, r, 1.0);
    EXPECT_NEAR(b.mu_gross_ann, 0.10, 1e-12);
    EXPECT_NEAR(b.v2_ann, 20.0, 1e-12);
    EXPECT_NEAR(b.v1_ann, 10.0, 1e-12);
    ASSERT_TRUE(b.cost_bps.has_value());
    EXPECT_NEAR(*b.cost_bps, 50.0, 1e-9);
}

TEST(BreakEven, FlipCountsTwoUnits) {
    const std::vector<double> s = {1.0, -1.0}, r = {0.01, 0.01};
    EXPECT_DOUBLE_EQ(breakeven_cost(s, r, 1.0).volume_two_way, 2.0);
    // Entering from flat at the boundary is one unit, then the flip.
    EXPECT_DOUBLE_EQ(breakeven_cost(s, r, 0.0).volume_two_way, 3.0);
}

TEST(BreakEven, NoTradingHasNoCost) {
    const std::vector<double> s(10, 1.0), r(10, 0.001);
    const auto b = breakeven_cost(s, r, 1.0);
    EXPECT_TRUE(b.no_trading);
    EXPECT_FALSE(b.cost.has_value());
    EXPECT_THROW(breakeven_cost({}, {}, 0.0), ContractViolation);
}

// Every {-1,0,1}^5 path and every entry position: the reported cost is the
// root of the net P&L, found independently by bisection.
TEST(BreakEven, EnumerationOracle) {
    const std::vector<double> r = {0.012, -0.004, 0.007, 0.003, -0.009};
    int checked = 0;
    for (int prev = -1; prev <= 1; ++prev) {
        for (int code = 0; code < 243; ++code) {
            std::vector<double> s(5);
            int c = code;
            for (auto& v : s) {
                v = double(c % 3 - 1);
                c /= 3;
            }
            const auto b = breakeven_cost(s, r, prev);
            double gross = 0.0, units = 0.0, last = prev;
            for (std::size_t t = 0; t < 5; ++t) {
                gross += s[t] * r[t];
                units += std::fabs(s[t] - last);
                last = s[t];
            }
            if (units == 0.0) {
                EXPECT_TRUE(b.no_trading);
                continue;
            }
            auto net = [&](double cost) { return gross - cost * units; };
            double lo = -1.0, hi = 1.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (net(mid) > 0.0 ? lo : hi) = mid;
            }
            ASSERT_TRUE(b.cost.has_value());
            EXPECT_NEAR(*b.cost, 0.5 * (lo + hi), 1e-14);
            ++checked;
        }
    }
    EXPECT_GT(checked, 700);
}

TEST(BreakEven, TrendDgpValidatesAndReplays) {
    TrendDgp d;
    const auto a = simulate_trend(d, 5);
    const auto b = simulate_trend(d, 5);
    EXPECT_EQ(a.r, b.r);
    EXPECT_EQ(a.size(), 2520u);
    d.p_stay = 1.0;
    EXPECT_THROW(simulate_trend(d, 5), ParameterDomainError);
}
