#include "nullaudit/breakeven.hpp"

#include <cmath>

#include "nullaudit/errors.hpp"
#include "nullaudit/rng.hpp"

namespace nullaudit::breakeven {

BreakEven breakeven_cost(std::span<const double> s, std::span<const double> r, double s_prev) {
    if (s.empty()) throw ContractViolation("walk-forward block is empty");
    if (s.size() != r.size()) throw ContractViolation("signal and return lengths differ");
    const double n = static_cast<double>(s.size());
    double gross = 0.0;
    double vol = 0.0;
    double prev = s_prev;
    for (std::size_t t = 0; t < s.size(); ++t) {
        gross += s[t] * r[t];
        vol += std::fabs(s[t] - prev);
        prev = s[t];
    }
    const double years = n / static_cast<double>(env::kTradingDays);
    BreakEven b;
    b.mu_gross_ann = static_cast<double>(env::kTradingDays) * gross / n;
    b.volume_two_way = vol;
    b.v2_ann = vol / years;
    b.v1_ann = b.v2_ann / 2.0;
    if (vol == 0.0) {
        b.no_trading = true;
        return b;
    }
    b.cost = b.mu_gross_ann / b.v2_ann;
    b.cost_bps = *b.cost * 1e4;
    return b;
}

void TrendDgp::validate() const {
    if (!(p_stay > 0.0 && p_stay < 1.0)) throw ParameterDomainError("p_stay must lie in (0,1)");
    if (!(sigma_ann > 0.0)) throw ParameterDomainError("sigma_ann must be > 0");
    if (!std::isfinite(drift_mult)) throw ParameterDomainError("drift_mult must be finite");
    if (length_T < 2) throw ParameterDomainError("length_T must be >= 2");
}

env::ReturnPath simulate_trend(const TrendDgp& dgp, std::uint64_t seed) {
    dgp.validate();
    rng::Stream s(rng::derive(seed, 0x7E4Du));
    const double days = static_cast<double>(env::kTradingDays);
    const double drift = dgp.drift_mult * dgp.sigma_ann / days;
    const double sd = dgp.sigma_ann / std::sqrt(days);
    // Symmetric chain: the stationary law is uniform over the two states.
    int state = s.uniform() < 0.5 ? 1 : -1;
    env::ReturnPath p;
    p.r.resize(dgp.length_T);
    for (std::size_t t = 0; t < dgp.length_T; ++t) {
        if (t > 0 && s.uniform() >= dgp.p_stay) state = -state;
        p.r[t] = state * drift + sd * s.normal();
    }
    p.label = "TrendRegime";
    p.seed = seed;
    p.simulated = true;
    return p;
}

}  // namespace nullaudit::breakeven
