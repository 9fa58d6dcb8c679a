#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "nullaudit/environments.hpp"

namespace nullaudit::breakeven {

struct BreakEven {
    double mu_gross_ann = 0.0;  // 252 * mean(s_t r_t)
    double volume_two_way = 0.0;  // V2 = sum |s_t - s_{t-1}|, boundary trade included
    double v2_ann = 0.0;
    double v1_ann = 0.0;  // one-way turnover, V2/2
    // Absent when nothing traded.
    std::optional<double> cost;
    std::optional<double> cost_bps;
    bool no_trading = false;
};

// s: walk-forward positions, r: walk-forward returns, s_prev: position held
// going into the block (the last in-sample position).
BreakEven breakeven_cost(std::span<const double> s, std::span<const double> r, double s_prev = 0.0);

// Two-state Markov trend: drift +-drift_mult * sigma_ann / 252 per day on top of
// N(0, sigma_ann^2 / 252) noise; the chain stays put with probability p_stay.
struct TrendDgp {
    double p_stay = 0.994;
    double drift_mult = 2.0;
    double sigma_ann = 0.15;
    std::size_t length_T = 2520;

    void validate() const;
};

env::ReturnPath simulate_trend(const TrendDgp& dgp, std::uint64_t seed);

}  // namespace nullaudit::breakeven
